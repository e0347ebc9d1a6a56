#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mtlfilm/error.hpp"

namespace mtlfilm::features {

enum class FeatureGroup { kSIR, kSentiment, kEvents, kBase };

/// How the preprocessor treats a column.
enum class FeatureKind {
  kContinuous,  // impute, winsorize, Yeo-Johnson, standardize
  kScaled,      // standardize only
  kRaw,         // passed through unchanged
};

inline std::string_view to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::kSIR: return "SIR";
    case FeatureGroup::kSentiment: return "Sentiment";
    case FeatureGroup::kEvents: return "Events";
    case FeatureGroup::kBase: return "Base";
  }
  return "?";
}

inline std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::kContinuous: return "continuous";
    case FeatureKind::kScaled: return "scaled";
    case FeatureKind::kRaw: return "raw";
  }
  return "?";
}

inline FeatureGroup parse_group(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "sir") return FeatureGroup::kSIR;
  if (lower == "sentiment") return FeatureGroup::kSentiment;
  if (lower == "events" || lower == "event") return FeatureGroup::kEvents;
  if (lower == "base") return FeatureGroup::kBase;
  throw Error(ErrorCode::kContractViolation, "unknown feature group '" + std::string(s) + "'");
}

inline FeatureKind parse_kind(std::string_view s) {
  if (s == "continuous") return FeatureKind::kContinuous;
  if (s == "scaled") return FeatureKind::kScaled;
  if (s == "raw") return FeatureKind::kRaw;
  throw Error(ErrorCode::kContractViolation, "unknown feature kind '" + std::string(s) + "'");
}

struct FeatureEntry {
  std::string name;
  FeatureGroup group;
  FeatureKind kind;

  bool operator==(const FeatureEntry&) const = default;
};

using GroupMask = std::set<FeatureGroup>;

class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureEntry> entries) : entries_(std::move(entries)) {
    std::set<std::string> names;
    for (const auto& e : entries_) {
      require(names.insert(e.name).second, "duplicate feature name " + e.name);
    }
  }

  const std::vector<FeatureEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t count(FeatureGroup g) const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [g](const auto& e) { return e.group == g; }));
  }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      if (entries_[k].name == name) return k;
    }
    throw Error(ErrorCode::kSchemaMismatch, "no feature named " + std::string(name));
  }

  /// Schema with every entry of the masked groups removed.
  FeatureSchema without(const GroupMask& mask) const {
    std::vector<FeatureEntry> kept;
    for (const auto& e : entries_) {
      if (!mask.contains(e.group)) kept.push_back(e);
    }
    require(!kept.empty(), "mask removes every feature group");
    return FeatureSchema(std::move(kept));
  }

  /// Positions (in this schema) of the entries that survive `mask`.
  std::vector<std::size_t> kept_indices(const GroupMask& mask) const {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      if (!mask.contains(entries_[k].group)) idx.push_back(k);
    }
    require(!idx.empty(), "mask removes every feature group");
    return idx;
  }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& e : entries_) {
      arr.push_back({{"name", e.name}, {"group", to_string(e.group)}, {"kind", to_string(e.kind)}});
    }
    return nlohmann::json{{"version", 1}, {"features", arr}};
  }

  static FeatureSchema from_json(const nlohmann::json& j) {
    require(j.contains("features") && j["features"].is_array(), "schema JSON lacks features",
            ErrorCode::kSchemaMismatch);
    std::vector<FeatureEntry> entries;
    for (const auto& f : j["features"]) {
      entries.push_back({f.at("name").get<std::string>(), parse_group(f.at("group").get<std::string>()),
                         parse_kind(f.at("kind").get<std::string>())});
    }
    return FeatureSchema(std::move(entries));
  }

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FeatureEntry> entries_;
};

/// The 29-column model input: SIR 7, Sentiment 5, Events 1, Base 16.
inline const FeatureSchema& canonical_schema() {
  using G = FeatureGroup;
  using K = FeatureKind;
  static const FeatureSchema schema({
      {"beta", G::kSIR, K::kContinuous},
      {"gamma", G::kSIR, K::kContinuous},
      {"basic_reproduction_number", G::kSIR, K::kContinuous},
      {"effective_contact_rate", G::kSIR, K::kContinuous},
      {"i0_s0_ratio", G::kSIR, K::kContinuous},
      {"pc1", G::kSIR, K::kScaled},
      {"pc2", G::kSIR, K::kScaled},
      {"sentiment_decayed_7d", G::kSentiment, K::kContinuous},
      {"sentiment_mean", G::kSentiment, K::kContinuous},
      {"sentiment_std", G::kSentiment, K::kContinuous},
      {"sentiment_positive_share", G::kSentiment, K::kContinuous},
      {"log_review_count", G::kSentiment, K::kContinuous},
      {"event_indicator", G::kEvents, K::kRaw},
      {"log_budget", G::kBase, K::kContinuous},
      {"runtime", G::kBase, K::kContinuous},
      {"release_month_sin", G::kBase, K::kRaw},
      {"release_month_cos", G::kBase, K::kRaw},
      {"release_year_norm", G::kBase, K::kRaw},
      {"language_top1", G::kBase, K::kRaw},
      {"language_top2", G::kBase, K::kRaw},
      {"language_top3", G::kBase, K::kRaw},
      {"language_other", G::kBase, K::kRaw},
      {"country_top1", G::kBase, K::kRaw},
      {"country_top2", G::kBase, K::kRaw},
      {"country_top3", G::kBase, K::kRaw},
      {"country_other", G::kBase, K::kRaw},
      {"production_company_count", G::kBase, K::kContinuous},
      {"director_prior_films", G::kBase, K::kContinuous},
      {"writer_count", G::kBase, K::kContinuous},
  });
  return schema;
}

inline FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot read schema " + path, ErrorCode::kIo);
  try {
    return FeatureSchema::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("schema JSON: ") + e.what());
  }
}

inline GroupMask parse_mask(std::string_view text) {
  GroupMask mask;
  std::string item;
  for (char c : std::string(text) + ",") {
    if (c == ',' || c == '+' || c == ' ') {
      if (!item.empty()) mask.insert(parse_group(item));
      item.clear();
    } else {
      item += c;
    }
  }
  return mask;
}

}  // namespace mtlfilm::features
