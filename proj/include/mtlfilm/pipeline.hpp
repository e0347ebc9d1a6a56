#pragma once

// From typed records to model-ready rows. build_raw_rows() computes
// per-film SIR, sentiment and base quantities without fitting anything; the
// Preprocessor is then fitted on training rows only and applied everywhere.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mtlfilm/csv.hpp"
#include "mtlfilm/error.hpp"
#include "mtlfilm/features.hpp"
#include "mtlfilm/ingest.hpp"
#include "mtlfilm/mtl_net.hpp"
#include "mtlfilm/records.hpp"
#include "mtlfilm/schema.hpp"
#include "mtlfilm/sentiment.hpp"
#include "mtlfilm/sir_dynamics.hpp"
#include "mtlfilm/timeline.hpp"

namespace mtlfilm::pipeline {

using features::canonical_schema;
using features::FeatureEntry;
using features::FeatureGroup;
using features::FeatureKind;
using features::FeatureSchema;
using features::GroupMask;

inline constexpr int kBudgetYearWindow = 2;
inline constexpr double kYearCenter = 2014.0;
inline constexpr double kYearScale = 10.0;
inline constexpr std::size_t kTopCategories = 3;
inline constexpr std::size_t kMinRowsForPowerFit = 10;

/// Unfitted per-film quantities. Absent values are imputed later from
/// training statistics.
struct RawRow {
  std::string movie_id;
  std::string language;  // primary listed language
  std::string country;   // primary listed country
  std::optional<double> beta, gamma, basic_reproduction_number, effective_contact_rate;
  std::optional<double> i0_s0_ratio, r0_s0_ratio, s0, i0, r0, peak_infected, time_to_peak;
  std::optional<double> sentiment_decayed_7d, sentiment_mean, sentiment_std, sentiment_positive_share;
  std::optional<double> review_count;
  std::optional<double> budget, opening_weekend, runtime, release_month;
  std::optional<double> release_year, production_company_count, director_prior_films, writer_count;

  bool operator==(const RawRow&) const = default;
};

using RawField = std::optional<double> RawRow::*;

inline const std::vector<std::pair<std::string, RawField>>& raw_numeric_columns() {
  static const std::vector<std::pair<std::string, RawField>> cols = {
      {"beta", &RawRow::beta},
      {"gamma", &RawRow::gamma},
      {"basic_reproduction_number", &RawRow::basic_reproduction_number},
      {"effective_contact_rate", &RawRow::effective_contact_rate},
      {"i0_s0_ratio", &RawRow::i0_s0_ratio},
      {"r0_s0_ratio", &RawRow::r0_s0_ratio},
      {"s0", &RawRow::s0},
      {"i0", &RawRow::i0},
      {"r0", &RawRow::r0},
      {"peak_infected", &RawRow::peak_infected},
      {"time_to_peak", &RawRow::time_to_peak},
      {"sentiment_decayed_7d", &RawRow::sentiment_decayed_7d},
      {"sentiment_mean", &RawRow::sentiment_mean},
      {"sentiment_std", &RawRow::sentiment_std},
      {"sentiment_positive_share", &RawRow::sentiment_positive_share},
      {"review_count", &RawRow::review_count},
      {"budget", &RawRow::budget},
      {"opening_weekend", &RawRow::opening_weekend},
      {"runtime", &RawRow::runtime},
      {"release_month", &RawRow::release_month},
      {"release_year", &RawRow::release_year},
      {"production_company_count", &RawRow::production_company_count},
      {"director_prior_films", &RawRow::director_prior_films},
      {"writer_count", &RawRow::writer_count},
  };
  return cols;
}

// ---------------------------------------------------------------------------
// Sentiment scoring

/// Scores every review. Reviews that arrive with a precomputed score bypass
/// the extractor. The timestamp field carries the review date so reruns are
/// byte-identical.
inline std::vector<sentiment::SentimentRecord> score_reviews(const std::vector<MovieRecord>& movies,
                                                             const std::vector<Review>& reviews,
                                                             sentiment::Extractor& extractor,
                                                             const sentiment::ExtractPolicy& policy = {}) {
  std::map<std::string, const MovieRecord*> by_id;
  for (const auto& m : movies) by_id[m.movie_id] = &m;
  std::vector<sentiment::SentimentRecord> out;
  out.reserve(reviews.size());
  for (const auto& r : reviews) {
    const auto it = by_id.find(r.movie_id);
    require(it != by_id.end(), "review " + r.review_id + " has no movie", ErrorCode::kSchemaMismatch);
    sentiment::SentimentRecord rec{r.review_id, r.movie_id, r.review_date, {}};
    if (r.sentiment_score) {
      rec.vector.sentiment_score = std::clamp(*r.sentiment_score, sentiment::kMinScore, sentiment::kMaxScore);
      rec.vector.emotion_keywords = r.emotion_keywords;
      rec.vector.emotion_keywords.resize(sentiment::kEmotionKeywordCount);
    } else {
      rec.vector = sentiment::extract(r, *it->second, extractor, policy);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::map<std::string, double> score_map(std::span<const sentiment::SentimentRecord> records) {
  std::map<std::string, double> out;
  for (const auto& r : records) out[r.review_id] = r.vector.sentiment_score;
  return out;
}

// ---------------------------------------------------------------------------
// Raw rows

struct BuildOptions {
  sentiment::AggregationConfig aggregation;
  double dt = sir::kDefaultDt;
  double horizon = sir::kDefaultHorizon;
};

struct BuildReport {
  std::size_t movies = 0;
  std::size_t without_reviews = 0;
  std::size_t inconsistent_timelines = 0;
  std::size_t gamma_floored = 0;
};

/// One row per movie. Review scores come from, in order: the review's own
/// precomputed score, `scores`, then the offline lexicon.
inline std::vector<RawRow> build_raw_rows(const std::vector<MovieRecord>& movies, const std::vector<Review>& reviews,
                                          const std::map<std::string, double>& scores,
                                          const BuildOptions& opts = {}, BuildReport* report = nullptr) {
  BuildReport local;
  BuildReport& rep = report ? *report : local;
  rep = {};
  rep.movies = movies.size();

  std::map<std::string, std::vector<const Review*>> by_movie;
  for (const auto& r : reviews) by_movie[r.movie_id].push_back(&r);

  // Prior films per director, by release date; same-day releases do not count.
  std::map<std::string, std::vector<std::chrono::sys_days>> director_dates;
  for (const auto& m : movies) {
    if (!m.director.empty()) director_dates[m.director].push_back(ingest::release_date(m));
  }
  for (auto& [_, dates] : director_dates) std::sort(dates.begin(), dates.end());

  std::vector<RawRow> rows;
  rows.reserve(movies.size());
  for (const auto& m : movies) {
    RawRow row;
    row.movie_id = m.movie_id;
    row.language = m.languages.empty() ? "" : m.languages.front();
    row.country = m.countries.empty() ? "" : m.countries.front();
    row.budget = m.budget;
    row.opening_weekend = m.opening_weekend;
    row.runtime = m.runtime;
    if (m.release_month) row.release_month = *m.release_month;
    row.release_year = m.release_year;
    row.production_company_count = static_cast<double>(m.production_companies.size());
    row.writer_count = static_cast<double>(m.writers.size());
    if (!m.director.empty()) {
      const auto& dates = director_dates[m.director];
      row.director_prior_films =
          static_cast<double>(std::lower_bound(dates.begin(), dates.end(), ingest::release_date(m)) - dates.begin());
    } else {
      row.director_prior_films = 0.0;
    }

    const auto it = by_movie.find(m.movie_id);
    if (it == by_movie.end() || it->second.empty()) {
      ++rep.without_reviews;
      row.review_count = 0.0;
      rows.push_back(std::move(row));
      continue;
    }
    std::vector<Review> film_reviews;
    for (const auto* r : it->second) film_reviews.push_back(*r);

    const auto counts = sir::count_timeline(build_timeline(film_reviews));
    if (counts.first_week_commenters + counts.first_week_negative_reviewers <= counts.total_reviewers) {
      const auto initial = sir::estimate_initial_conditions(counts);
      const auto rates = sir::estimate_rates(counts);
      if (rates.gamma_floored) ++rep.gamma_floored;
      const auto traj = sir::simulate(initial, rates.params, opts.dt, opts.horizon);
      const auto f = sir::derived_features(initial, rates.params, traj);
      row.beta = rates.params.beta;
      row.gamma = rates.params.gamma;
      row.basic_reproduction_number = f.basic_reproduction_number;
      row.effective_contact_rate = f.effective_contact_rate;
      row.i0_s0_ratio = f.i0_s0_ratio;
      row.r0_s0_ratio = f.r0_s0_ratio;
      row.s0 = initial.s;
      row.i0 = initial.i;
      row.r0 = initial.r;
      row.peak_infected = f.peak_infected;
      row.time_to_peak = f.time_to_peak;
    } else {
      ++rep.inconsistent_timelines;
    }

    std::vector<sentiment::ScoredReview> all, first_week;
    double last_day = 0.0;
    for (const auto& r : film_reviews) {
      double score;
      if (r.sentiment_score) {
        score = std::clamp(*r.sentiment_score, sentiment::kMinScore, sentiment::kMaxScore);
      } else if (const auto s = scores.find(r.review_id); s != scores.end()) {
        score = s->second;
      } else {
        score = sentiment::stub_analyze(r).sentiment_score;
      }
      const sentiment::ScoredReview sr{score, static_cast<double>(r.days_since_release), r.upvotes, r.total_votes};
      all.push_back(sr);
      if (sr.days_since_release <= sir::kFirstWeekDays) first_week.push_back(sr);
      last_day = std::max(last_day, sr.days_since_release);
    }
    const auto early = sentiment::aggregate_temporal(first_week, sir::kFirstWeekDays, opts.aggregation);
    const auto overall = sentiment::aggregate_temporal(all, last_day, opts.aggregation);
    row.sentiment_decayed_7d = early.s_t;
    row.sentiment_mean = overall.mean_score;
    row.sentiment_std = overall.score_std;
    row.sentiment_positive_share = overall.positive_share;
    row.review_count = static_cast<double>(overall.review_count);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Rows without an opening-weekend figure cannot be labeled or regressed.
inline std::vector<RawRow> labelable(std::vector<RawRow> rows) {
  std::erase_if(rows, [](const RawRow& r) { return !r.opening_weekend; });
  return rows;
}

inline void write_raw_csv(const std::string& path, std::span<const RawRow> rows) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path, ErrorCode::kIo);
  std::vector<std::string> header = {"movie_id", "language", "country"};
  for (const auto& [name, _] : raw_numeric_columns()) header.push_back(name);
  csv::write_row(out, header);
  for (const auto& r : rows) {
    std::vector<std::string> f = {r.movie_id, r.language, r.country};
    for (const auto& [_, field] : raw_numeric_columns()) {
      const auto& v = r.*field;
      f.push_back(v ? csv::format_double(*v) : "NA");
    }
    csv::write_row(out, f);
  }
}

inline std::vector<RawRow> read_raw_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  require(!rows.empty(), "raw table " + path + " has no header", ErrorCode::kSchemaMismatch);
  std::vector<std::string> expected = {"movie_id", "language", "country"};
  for (const auto& [name, _] : raw_numeric_columns()) expected.push_back(name);
  const auto cols = ingest::bind_header(rows.front().fields, expected);
  std::vector<RawRow> out;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& f = rows[k].fields;
    require(f.size() == expected.size(), "raw table line " + std::to_string(rows[k].line) + ": wrong field count",
            ErrorCode::kSchemaMismatch);
    RawRow r;
    r.movie_id = f[cols.at("movie_id")];
    r.language = f[cols.at("language")];
    r.country = f[cols.at("country")];
    for (const auto& [name, field] : raw_numeric_columns()) {
      r.*field = ingest::parse_amount(f[cols.at(name)]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessing

/// Median-impute, winsorize, Yeo-Johnson, standardize.
struct ColumnTransform {
  std::string name;
  double median = 0.0;
  features::WinsorBounds bounds;
  double lambda = 1.0;
  double mean = 0.0;
  double sd = 1.0;

  double impute(std::optional<double> v) const { return v && std::isfinite(*v) ? *v : median; }
  double apply(std::optional<double> v) const {
    return (features::yeo_johnson(bounds.apply(impute(v)), lambda) - mean) / sd;
  }
};

struct FeatureVector {
  std::vector<double> values;  // canonical schema order
  int label = 0;
  double target = 0.0;  // standardized log1p(opening weekend)
};

namespace detail {

inline double median_of(std::vector<double> v) {
  require(!v.empty(), "median of empty column", ErrorCode::kEmptyDataset);
  std::sort(v.begin(), v.end());
  return features::quantile_sorted(v, 0.5);
}

inline std::vector<std::string> top_categories(const std::vector<std::string>& values) {
  std::map<std::string, std::size_t> freq;
  for (const auto& v : values) {
    if (!v.empty()) ++freq[v];
  }
  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t k = 0; k < std::min(kTopCategories, items.size()); ++k) out.push_back(items[k].first);
  return out;
}

inline nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

/// Names of the PCA inputs, all taken after imputation and winsorization.
inline const std::vector<std::string>& pca_input_names() {
  static const std::vector<std::string> names = {"beta",          "neg_log_gamma", "i0",
                                                 "r0",            "peak_infected", "time_to_peak"};
  return names;
}

class Preprocessor {
 public:
  /// Fits every statistic on rows[train_indices] only.
  static Preprocessor fit(std::span<const RawRow> rows, std::span<const std::size_t> train_indices) {
    if (train_indices.empty()) throw Error(ErrorCode::kEmptyDataset, "no training rows to fit on");
    Preprocessor p;
    std::vector<const RawRow*> train;
    for (auto i : train_indices) {
      require(i < rows.size(), "train index out of range");
      train.push_back(&rows[i]);
    }

    std::vector<double> budgets;
    for (const auto* r : train) {
      if (r->budget && *r->budget > 0.0 && r->release_year) {
        p.budget_by_year_.emplace_back(static_cast<int>(*r->release_year), *r->budget);
        budgets.push_back(*r->budget);
      }
    }
    if (budgets.empty()) throw Error(ErrorCode::kMissingBudget, "no training row has a budget to impute from");
    std::sort(p.budget_by_year_.begin(), p.budget_by_year_.end());
    p.global_budget_median_ = detail::median_of(budgets);

    for (const auto& entry : canonical_schema().entries()) {
      if (entry.kind != FeatureKind::kContinuous) continue;
      std::vector<std::optional<double>> raw;
      for (const auto* r : train) raw.push_back(p.continuous_source(*r, entry.name));
      p.columns_.push_back(fit_column(entry.name, raw, true));
    }

    std::vector<std::vector<std::optional<double>>> pca_raw(pca_input_names().size());
    for (const auto* r : train) {
      const auto v = pca_source(*r);
      for (std::size_t j = 0; j < v.size(); ++j) pca_raw[j].push_back(v[j]);
    }
    for (std::size_t j = 0; j < pca_raw.size(); ++j) {
      p.pca_inputs_.push_back(fit_column(pca_input_names()[j], pca_raw[j], false));
    }
    if (train.size() >= 2) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(pca_raw.size()));
      for (std::size_t i = 0; i < train.size(); ++i) {
        for (std::size_t j = 0; j < pca_raw.size(); ++j) {
          const auto& c = p.pca_inputs_[j];
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.bounds.apply(c.impute(pca_raw[j][i]));
        }
      }
      for (Eigen::Index k = 2; k >= 1 && !p.pca_; --k) {
        try {
          p.pca_ = features::pca_fit(m, k);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kRankDeficient) throw;
        }
      }
    }

    std::vector<std::string> langs, countries;
    for (const auto* r : train) {
      langs.push_back(r->language);
      countries.push_back(r->country);
    }
    p.top_languages_ = detail::top_categories(langs);
    p.top_countries_ = detail::top_categories(countries);

    std::vector<double> targets;
    for (const auto* r : train) {
      if (r->opening_weekend) targets.push_back(std::log1p(*r->opening_weekend));
    }
    if (targets.empty()) throw Error(ErrorCode::kEmptyDataset, "no training row has an opening weekend");
    double mean = 0.0;
    for (double t : targets) mean += t;
    mean /= static_cast<double>(targets.size());
    double ss = 0.0;
    for (double t : targets) ss += (t - mean) * (t - mean);
    const double sd = targets.size() > 1 ? std::sqrt(ss / static_cast<double>(targets.size() - 1)) : 0.0;
    p.target_mean_ = mean;
    p.target_sd_ = sd > 0.0 ? sd : 1.0;
    return p;
  }

  /// Median budget of training films released within two years, else the
  /// global training median.
  double imputed_budget(const RawRow& r) const {
    if (r.budget && *r.budget > 0.0) return *r.budget;
    if (r.release_year) {
      const int y = static_cast<int>(*r.release_year);
      std::vector<double> near;
      for (const auto& [year, b] : budget_by_year_) {
        if (std::abs(year - y) <= kBudgetYearWindow) near.push_back(b);
      }
      if (!near.empty()) return detail::median_of(std::move(near));
    }
    return global_budget_median_;
  }

  int label(const RawRow& r) const {
    if (!r.opening_weekend) throw Error(ErrorCode::kEmptyDataset, "movie " + r.movie_id + " has no opening weekend");
    return features::compute_label(*r.opening_weekend, imputed_budget(r));
  }

  double scale_target(double opening_weekend) const {
    return (std::log1p(opening_weekend) - target_mean_) / target_sd_;
  }
  double unscale_target(double scaled) const { return std::expm1(scaled * target_sd_ + target_mean_); }

  /// Full-width feature vector. Label and target are left at 0 when the row
  /// has no opening weekend (prediction on unlabeled films).
  FeatureVector transform(const RawRow& r) const {
    const auto& schema = canonical_schema();
    FeatureVector fv;
    fv.values.assign(schema.size(), 0.0);
    std::size_t continuous = 0;
    Eigen::VectorXd pcs = Eigen::VectorXd::Zero(2);
    if (pca_) {
      const auto src = pca_source(r);
      Eigen::VectorXd v(static_cast<Eigen::Index>(src.size()));
      for (std::size_t j = 0; j < src.size(); ++j) {
        v(static_cast<Eigen::Index>(j)) = pca_inputs_[j].bounds.apply(pca_inputs_[j].impute(src[j]));
      }
      const auto scores = features::pca_project(*pca_, v);
      pcs.head(scores.size()) = scores;
    }
    const int language_slot = slot_of(top_languages_, r.language);
    const int country_slot = slot_of(top_countries_, r.country);
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const auto& e = schema.entries()[k];
      double& out = fv.values[k];
      if (e.kind == FeatureKind::kContinuous) {
        out = columns_[continuous++].apply(continuous_source(r, e.name));
      } else if (e.name == "pc1") {
        out = pcs(0);
      } else if (e.name == "pc2") {
        out = pcs(1);
      } else if (e.name == "event_indicator") {
        out = r.release_year ? features::event_indicator(static_cast<int>(*r.release_year)) : 0.0;
      } else if (e.name == "release_month_sin" || e.name == "release_month_cos") {
        if (r.release_month) {
          const double angle = 2.0 * std::numbers::pi * (*r.release_month - 1.0) / 12.0;
          out = e.name == "release_month_sin" ? std::sin(angle) : std::cos(angle);
        }
      } else if (e.name == "release_year_norm") {
        out = r.release_year ? (*r.release_year - kYearCenter) / kYearScale : 0.0;
      } else if (e.name.starts_with("language_")) {
        out = e.name == category_name("language", language_slot) ? 1.0 : 0.0;
      } else if (e.name.starts_with("country_")) {
        out = e.name == category_name("country", country_slot) ? 1.0 : 0.0;
      } else {
        throw Error(ErrorCode::kSchemaMismatch, "no transform for feature " + e.name);
      }
    }
    for (double v : fv.values) require(std::isfinite(v), "non-finite feature for movie " + r.movie_id);
    if (r.opening_weekend) {
      fv.label = label(r);
      fv.target = scale_target(*r.opening_weekend);
    }
    return fv;
  }

  const std::vector<ColumnTransform>& columns() const { return columns_; }
  const std::optional<features::PCAModel>& pca() const { return pca_; }
  const std::vector<std::string>& top_languages() const { return top_languages_; }
  const std::vector<std::string>& top_countries() const { return top_countries_; }
  double target_mean() const { return target_mean_; }
  double target_sd() const { return target_sd_; }

  nlohmann::json to_json() const {
    auto col_json = [](const ColumnTransform& c) {
      return nlohmann::json{{"name", c.name}, {"median", c.median}, {"winsor_low", c.bounds.low},
                            {"winsor_high", c.bounds.high}, {"lambda", c.lambda}, {"mean", c.mean}, {"sd", c.sd}};
    };
    nlohmann::json j;
    j["budget_by_year"] = budget_by_year_;
    j["global_budget_median"] = global_budget_median_;
    for (const auto& c : columns_) j["columns"].push_back(col_json(c));
    for (const auto& c : pca_inputs_) j["pca_inputs"].push_back(col_json(c));
    if (pca_) {
      std::vector<std::vector<double>> comps;
      for (Eigen::Index r = 0; r < pca_->components.rows(); ++r) {
        auto& row = comps.emplace_back();
        for (Eigen::Index c = 0; c < pca_->components.cols(); ++c) row.push_back(pca_->components(r, c));
      }
      j["pca"] = {{"mean", detail::vec_json(pca_->mean)},
                  {"scale", detail::vec_json(pca_->scale)},
                  {"components", comps},
                  {"explained_variance_ratio", detail::vec_json(pca_->explained_variance_ratio)},
                  {"eigenvalues", detail::vec_json(pca_->eigenvalues)}};
    } else {
      j["pca"] = nullptr;
    }
    j["top_languages"] = top_languages_;
    j["top_countries"] = top_countries_;
    j["target_mean"] = target_mean_;
    j["target_sd"] = target_sd_;
    return j;
  }

  static Preprocessor from_json(const nlohmann::json& j) {
    auto col = [](const nlohmann::json& c) {
      ColumnTransform t;
      t.name = c.at("name").get<std::string>();
      t.median = c.at("median").get<double>();
      t.bounds = {c.at("winsor_low").get<double>(), c.at("winsor_high").get<double>()};
      t.lambda = c.at("lambda").get<double>();
      t.mean = c.at("mean").get<double>();
      t.sd = c.at("sd").get<double>();
      return t;
    };
    Preprocessor p;
    try {
      p.budget_by_year_ = j.at("budget_by_year").get<std::vector<std::pair<int, double>>>();
      p.global_budget_median_ = j.at("global_budget_median").get<double>();
      for (const auto& c : j.at("columns")) p.columns_.push_back(col(c));
      for (const auto& c : j.at("pca_inputs")) p.pca_inputs_.push_back(col(c));
      if (!j.at("pca").is_null()) {
        const auto& q = j.at("pca");
        features::PCAModel m;
        m.mean = detail::json_vec(q.at("mean"));
        m.scale = detail::json_vec(q.at("scale"));
        const auto comps = q.at("components").get<std::vector<std::vector<double>>>();
        m.components.resize(static_cast<Eigen::Index>(comps.size()), m.mean.size());
        for (std::size_t r = 0; r < comps.size(); ++r) {
          require(comps[r].size() == static_cast<std::size_t>(m.mean.size()), "bad PCA component width",
                  ErrorCode::kSchemaMismatch);
          for (std::size_t c = 0; c < comps[r].size(); ++c) {
            m.components(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = comps[r][c];
          }
        }
        m.explained_variance_ratio = detail::json_vec(q.at("explained_variance_ratio"));
        m.eigenvalues = detail::json_vec(q.at("eigenvalues"));
        p.pca_ = std::move(m);
      }
      p.top_languages_ = j.at("top_languages").get<std::vector<std::string>>();
      p.top_countries_ = j.at("top_countries").get<std::vector<std::string>>();
      p.target_mean_ = j.at("target_mean").get<double>();
      p.target_sd_ = j.at("target_sd").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchemaMismatch, std::string("preprocessor JSON: ") + e.what());
    }
    return p;
  }

 private:
  std::optional<double> continuous_source(const RawRow& r, const std::string& name) const {
    if (name == "log_budget") return std::log(imputed_budget(r));
    if (name == "log_review_count") return r.review_count ? std::optional(std::log1p(*r.review_count)) : std::nullopt;
    for (const auto& [col, field] : raw_numeric_columns()) {
      if (col == name) return r.*field;
    }
    throw Error(ErrorCode::kSchemaMismatch, "no raw source for feature " + name);
  }

  static std::vector<std::optional<double>> pca_source(const RawRow& r) {
    const std::optional<double> neg_log_gamma =
        r.gamma && *r.gamma > 0.0 ? std::optional(-std::log(*r.gamma)) : std::nullopt;
    return {r.beta, neg_log_gamma, r.i0, r.r0, r.peak_infected, r.time_to_peak};
  }

  static ColumnTransform fit_column(const std::string& name, const std::vector<std::optional<double>>& raw,
                                    bool power) {
    ColumnTransform t;
    t.name = name;
    std::vector<double> present;
    for (const auto& v : raw) {
      if (v && std::isfinite(*v)) present.push_back(*v);
    }
    t.median = present.empty() ? 0.0 : detail::median_of(present);
    std::vector<double> col;
    for (const auto& v : raw) col.push_back(t.impute(v));
    t.bounds = features::fit_winsor_bounds(col);
    col = features::winsorize(col);
    if (!power) return t;
    if (col.size() >= kMinRowsForPowerFit && !features::is_constant(col)) {
      t.lambda = features::fit_yeo_johnson(col, name).lambda_yj;
    }
    for (auto& v : col) v = features::yeo_johnson(v, t.lambda);
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(col.size());
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = col.size() > 1 ? std::sqrt(ss / static_cast<double>(col.size() - 1)) : 0.0;
    t.mean = mean;
    t.sd = sd > 0.0 ? sd : 1.0;
    return t;
  }

  static int slot_of(const std::vector<std::string>& top, const std::string& value) {
    for (std::size_t k = 0; k < top.size(); ++k) {
      if (top[k] == value) return static_cast<int>(k);
    }
    return -1;
  }

  static std::string category_name(const std::string& prefix, int slot) {
    return slot < 0 ? prefix + "_other" : prefix + "_top" + std::to_string(slot + 1);
  }

  std::vector<std::pair<int, double>> budget_by_year_;
  double global_budget_median_ = 0.0;
  std::vector<ColumnTransform> columns_;
  std::vector<ColumnTransform> pca_inputs_;
  std::optional<features::PCAModel> pca_;
  std::vector<std::string> top_languages_, top_countries_;
  double target_mean_ = 0.0, target_sd_ = 1.0;
};

/// Drops the masked groups from a full-width vector.
inline std::vector<double> assemble(const FeatureVector& fv, const GroupMask& mask) {
  const auto& schema = canonical_schema();
  require(fv.values.size() == schema.size(), "feature vector does not match the schema", ErrorCode::kShapeMismatch);
  std::vector<double> out;
  for (auto k : schema.kept_indices(mask)) out.push_back(fv.values[k]);
  return out;
}

/// Model-ready table for a subset of rows.
struct FeatureTable {
  FeatureSchema schema;
  std::vector<std::string> movie_ids;
  mtl::Dataset data;
};

inline FeatureTable make_table(std::span<const RawRow> rows, std::span<const std::size_t> indices,
                               const Preprocessor& prep, const GroupMask& mask) {
  FeatureTable t{canonical_schema().without(mask), {}, {}};
  t.data.width = t.schema.size();
  for (auto i : indices) {
    const auto fv = prep.transform(rows[i]);
    t.data.push_back(assemble(fv, mask), fv.label, fv.target);
    t.movie_ids.push_back(rows[i].movie_id);
  }
  return t;
}

/// Labels computed from raw budgets, used only to stratify splits before any
/// statistic is fitted. Films without a budget borrow the median budget of
/// all films; the model's own labels always come from the fitted imputer.
inline std::vector<int> stratification_labels(std::span<const RawRow> rows) {
  std::vector<double> budgets;
  for (const auto& r : rows) {
    if (r.budget && *r.budget > 0.0) budgets.push_back(*r.budget);
  }
  if (budgets.empty()) throw Error(ErrorCode::kMissingBudget, "no film has a budget");
  const double fallback = detail::median_of(budgets);
  std::vector<int> labels;
  for (const auto& r : rows) {
    require(r.opening_weekend.has_value(), "movie " + r.movie_id + " has no opening weekend",
            ErrorCode::kEmptyDataset);
    labels.push_back(features::compute_label(*r.opening_weekend, r.budget && *r.budget > 0.0 ? *r.budget : fallback));
  }
  return labels;
}

// ---------------------------------------------------------------------------
// features.csv: movie_id, split, label, target, then the schema columns.

struct LabeledRow {
  std::string movie_id;
  std::string split;
  int label = 0;
  double target = 0.0;
  std::vector<double> values;
};

inline void write_features_csv(const std::string& path, const FeatureSchema& schema,
                               std::span<const LabeledRow> rows) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path, ErrorCode::kIo);
  std::vector<std::string> header = {"movie_id", "split", "label", "target"};
  for (const auto& e : schema.entries()) header.push_back(e.name);
  csv::write_row(out, header);
  for (const auto& r : rows) {
    require(r.values.size() == schema.size(), "row width does not match schema", ErrorCode::kShapeMismatch);
    std::vector<std::string> f = {r.movie_id, r.split, std::to_string(r.label), csv::format_double(r.target)};
    for (double v : r.values) f.push_back(csv::format_double(v));
    csv::write_row(out, f);
  }
}

struct FeatureFile {
  FeatureSchema schema;
  std::vector<LabeledRow> rows;

  mtl::Dataset dataset(const std::string& split = {}) const {
    mtl::Dataset d;
    d.width = schema.size();
    for (const auto& r : rows) {
      if (split.empty() || r.split == split) d.push_back(r.values, r.label, r.target);
    }
    return d;
  }
};

/// The schema is recovered from the header by name lookup in the canonical
/// schema, so masked files read back with their reduced width.
inline FeatureFile read_features_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  require(!rows.empty(), "feature file " + path + " has no header", ErrorCode::kSchemaMismatch);
  const auto& header = rows.front().fields;
  require(header.size() > 4 && header[0] == "movie_id" && header[1] == "split" && header[2] == "label" &&
              header[3] == "target",
          "feature file header must start with movie_id,split,label,target", ErrorCode::kSchemaMismatch);
  std::vector<FeatureEntry> entries;
  const auto& canon = canonical_schema();
  for (std::size_t k = 4; k < header.size(); ++k) entries.push_back(canon.entries()[canon.index_of(header[k])]);
  FeatureFile file{FeatureSchema(std::move(entries)), {}};
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& f = rows[k].fields;
    require(f.size() == header.size(), "feature file line " + std::to_string(rows[k].line) + ": wrong field count",
            ErrorCode::kSchemaMismatch);
    LabeledRow r;
    r.movie_id = f[0];
    r.split = f[1];
    try {
      r.label = std::stoi(f[2]);
      r.target = std::stod(f[3]);
      for (std::size_t c = 4; c < f.size(); ++c) r.values.push_back(std::stod(f[c]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kSchemaMismatch, "feature file line " + std::to_string(rows[k].line) + ": bad number");
    }
    file.rows.push_back(std::move(r));
  }
  return file;
}

}  // namespace mtlfilm::pipeline
