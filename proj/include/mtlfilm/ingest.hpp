#pragma once

// Movie and review CSV schemas: typed loading with a rejects list, writing,
// and author anonymization.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtlfilm/crypto.hpp"
#include "mtlfilm/csv.hpp"
#include "mtlfilm/error.hpp"
#include "mtlfilm/records.hpp"

namespace mtlfilm::ingest {

inline const std::vector<std::string>& movie_columns() {
  static const std::vector<std::string> cols = {
      "Movie_ID",       "Title",         "Director",          "Writers",
      "Gross_Worldwide", "Opening_Weekend", "Budget",          "Language",
      "Country",        "Filming_Locations", "Production_Companies", "Release_Day",
      "Release_Month",  "Release_Year",  "Runtime"};
  return cols;
}

inline const std::vector<std::string>& review_columns() {
  static const std::vector<std::string> cols = {"Movie_ID",     "Review_Author", "Review_Date",
                                                "Review_Title", "Review_Body",   "Upvotes",
                                                "Total_Votes",  "Rating"};
  return cols;
}

inline const std::vector<std::string>& optional_review_columns() {
  static const std::vector<std::string> cols = {"Sentiment_Score", "Emotion_Keywords"};
  return cols;
}

inline constexpr char kListSeparator = ';';
inline constexpr int kPreReleaseWindowDays = 30;

struct Reject {
  std::size_t line = 0;
  std::string reason;
};

template <typename T>
struct LoadResult {
  std::vector<T> records;
  std::vector<Reject> rejects;
  std::size_t total_rows = 0;
};

// ---------------------------------------------------------------------------
// Field parsing

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool is_missing(const std::string& s) {
  const auto t = lower(trim(s));
  return t.empty() || t == "n/a" || t == "na" || t == "nan" || t == "null";
}

}  // namespace detail

/// Currency-tolerant number: "$1,250,000" -> 1250000. Missing markers give
/// an empty optional; anything else unparsable throws.
inline std::optional<double> parse_amount(const std::string& raw) {
  if (detail::is_missing(raw)) return std::nullopt;
  std::string cleaned;
  for (char c : detail::trim(raw)) {
    if (c != '$' && c != ',' && c != ' ') cleaned += c;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cleaned, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kSchemaMismatch, "not a number: '" + raw + "'");
  }
  if (used != cleaned.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kSchemaMismatch, "not a number: '" + raw + "'");
  }
  return v;
}

inline std::optional<int> parse_int(const std::string& raw) {
  const auto v = parse_amount(raw);
  if (!v) return std::nullopt;
  if (*v != std::floor(*v)) throw Error(ErrorCode::kSchemaMismatch, "not an integer: '" + raw + "'");
  return static_cast<int>(*v);
}

inline std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  if (detail::is_missing(raw)) return out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, kListSeparator)) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k) out += kListSeparator;
    out += items[k];
  }
  return out;
}

inline std::chrono::sys_days parse_date(const std::string& iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream is(detail::trim(iso));
  is >> y >> dash1 >> m >> dash2 >> d;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!is || dash1 != '-' || dash2 != '-' || !ymd.ok()) {
    throw Error(ErrorCode::kSchemaMismatch, "bad date '" + iso + "' (expected YYYY-MM-DD)");
  }
  return std::chrono::sys_days{ymd};
}

inline std::string format_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::chrono::sys_days release_date(const MovieRecord& m) {
  using namespace std::chrono;
  const year_month_day ymd{year{m.release_year}, month{static_cast<unsigned>(m.release_month.value_or(1))},
                           day{static_cast<unsigned>(m.release_day.value_or(1))}};
  if (!ymd.ok()) {
    return sys_days{year_month_day{year{m.release_year}, month{1}, day{1}}};
  }
  return sys_days{ymd};
}

/// Keyed, non-invertible author identifier.
inline std::string anonymize_author(const std::string& raw_author, const std::string& salt) {
  require(!salt.empty(), "anonymize_author requires a nonempty salt");
  return "u" + crypto::hmac_sha256_hex(salt, raw_author).substr(0, 20);
}

// ---------------------------------------------------------------------------
// Header handling

/// Maps schema column name -> position in the file; throws SchemaMismatch
/// naming every missing and unexpected column.
inline std::map<std::string, std::size_t> bind_header(const std::vector<std::string>& header,
                                                      const std::vector<std::string>& required,
                                                      const std::vector<std::string>& optional = {}) {
  std::map<std::string, std::size_t> bound;
  std::vector<std::string> extra;
  for (std::size_t k = 0; k < header.size(); ++k) {
    const auto name = detail::lower(detail::trim(header[k]));
    bool matched = false;
    for (const auto* list : {&required, &optional}) {
      for (const auto& col : *list) {
        if (detail::lower(col) == name) {
          bound[col] = k;
          matched = true;
        }
      }
    }
    if (!matched) extra.push_back(header[k]);
  }
  std::vector<std::string> missing;
  for (const auto& col : required) {
    if (!bound.contains(col)) missing.push_back(col);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "header mismatch;";
    if (!missing.empty()) msg += " missing: " + join_list(missing);
    if (!extra.empty()) msg += " extra: " + join_list(extra);
    throw Error(ErrorCode::kSchemaMismatch, msg);
  }
  return bound;
}

// ---------------------------------------------------------------------------
// Movies

inline MovieRecord parse_movie_row(const std::map<std::string, std::size_t>& cols,
                                   const std::vector<std::string>& f) {
  auto get = [&](const char* name) -> const std::string& { return f.at(cols.at(name)); };
  MovieRecord m;
  m.movie_id = detail::trim(get("Movie_ID"));
  require(!m.movie_id.empty(), "empty Movie_ID", ErrorCode::kSchemaMismatch);
  m.title = get("Title");
  m.director = detail::trim(get("Director"));
  m.writers = split_list(get("Writers"));
  m.gross_worldwide = parse_amount(get("Gross_Worldwide"));
  m.opening_weekend = parse_amount(get("Opening_Weekend"));
  m.budget = parse_amount(get("Budget"));
  m.languages = split_list(get("Language"));
  m.countries = split_list(get("Country"));
  m.filming_locations = split_list(get("Filming_Locations"));
  m.production_companies = split_list(get("Production_Companies"));
  m.release_day = parse_int(get("Release_Day"));
  m.release_month = parse_int(get("Release_Month"));
  const auto year = parse_int(get("Release_Year"));
  require(year.has_value(), "missing Release_Year", ErrorCode::kSchemaMismatch);
  m.release_year = *year;
  m.runtime = parse_amount(get("Runtime"));
  for (const auto& [name, v] : {std::pair{"Budget", m.budget}, std::pair{"Opening_Weekend", m.opening_weekend},
                                std::pair{"Gross_Worldwide", m.gross_worldwide}}) {
    require(!v || *v >= 0.0, std::string(name) + " must be >= 0", ErrorCode::kSchemaMismatch);
  }
  require(!m.runtime || *m.runtime > 0.0, "Runtime must be > 0", ErrorCode::kSchemaMismatch);
  require(!m.release_month || (*m.release_month >= 1 && *m.release_month <= 12),
          "Release_Month out of range", ErrorCode::kSchemaMismatch);
  require(!m.release_day || (*m.release_day >= 1 && *m.release_day <= 31),
          "Release_Day out of range", ErrorCode::kSchemaMismatch);
  return m;
}

inline LoadResult<MovieRecord> load_movies(const std::string& path) {
  const auto rows = csv::read_file(path);
  require(!rows.empty(), "movies file has no header: " + path, ErrorCode::kSchemaMismatch);
  const auto cols = bind_header(rows.front().fields, movie_columns());
  LoadResult<MovieRecord> result;
  std::set<std::string> seen;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    ++result.total_rows;
    const auto& row = rows[k];
    try {
      require(row.fields.size() == rows.front().fields.size(), "wrong field count",
              ErrorCode::kSchemaMismatch);
      auto m = parse_movie_row(cols, row.fields);
      require(seen.insert(m.movie_id).second, "duplicate Movie_ID " + m.movie_id,
              ErrorCode::kSchemaMismatch);
      result.records.push_back(std::move(m));
    } catch (const Error& e) {
      result.rejects.push_back({row.line, e.what()});
    }
  }
  return result;
}

inline std::string amount_field(std::optional<double> v) { return v ? csv::format_double(*v) : "N/A"; }

template <typename T>
std::string opt_field(std::optional<T> v) {
  return v ? csv::format_double(static_cast<double>(*v)) : "";
}

inline void write_movies(const std::string& path, const std::vector<MovieRecord>& movies) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path, ErrorCode::kIo);
  csv::write_row(out, movie_columns());
  for (const auto& m : movies) {
    csv::write_row(out, {m.movie_id, m.title, m.director, join_list(m.writers),
                         amount_field(m.gross_worldwide), amount_field(m.opening_weekend),
                         amount_field(m.budget), join_list(m.languages), join_list(m.countries),
                         join_list(m.filming_locations), join_list(m.production_companies),
                         opt_field(m.release_day), opt_field(m.release_month),
                         std::to_string(m.release_year), opt_field(m.runtime)});
  }
}

// ---------------------------------------------------------------------------
// Reviews

struct ReviewLoadOptions {
  /// When set, authors are replaced by keyed hashes on load.
  std::optional<std::string> anonymization_salt;
};

/// Loads reviews and resolves each against its film's release date. Reviews
/// for unknown films or dated more than 30 days before release are rejected;
/// reviews inside the pre-release window count as day 0.
inline LoadResult<Review> load_reviews(const std::string& path, const std::vector<MovieRecord>& movies,
                                       const ReviewLoadOptions& options = {}) {
  const auto rows = csv::read_file(path);
  require(!rows.empty(), "reviews file has no header: " + path, ErrorCode::kSchemaMismatch);
  const auto cols = bind_header(rows.front().fields, review_columns(), optional_review_columns());
  std::unordered_map<std::string, const MovieRecord*> by_id;
  for (const auto& m : movies) by_id[m.movie_id] = &m;
  std::unordered_map<std::string, std::size_t> ordinal;

  LoadResult<Review> result;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    ++result.total_rows;
    const auto& row = rows[k];
    try {
      require(row.fields.size() == rows.front().fields.size(), "wrong field count",
              ErrorCode::kSchemaMismatch);
      auto get = [&](const char* name) -> const std::string& { return row.fields.at(cols.at(name)); };
      Review r;
      r.movie_id = detail::trim(get("Movie_ID"));
      const auto it = by_id.find(r.movie_id);
      require(it != by_id.end(), "unknown Movie_ID " + r.movie_id, ErrorCode::kSchemaMismatch);
      const std::string author = get("Review_Author");
      require(!detail::trim(author).empty(), "empty Review_Author", ErrorCode::kSchemaMismatch);
      r.author_id = options.anonymization_salt ? anonymize_author(author, *options.anonymization_salt)
                                               : author;
      const auto date = parse_date(get("Review_Date"));
      r.review_date = format_date(date);
      const auto offset = (date - release_date(*it->second)).count();
      require(offset >= -kPreReleaseWindowDays, "review dated before the pre-release window",
              ErrorCode::kSchemaMismatch);
      r.days_since_release = static_cast<double>(std::max<long>(offset, 0));
      r.title = get("Review_Title");
      r.body = get("Review_Body");
      r.upvotes = parse_int(get("Upvotes")).value_or(0);
      r.total_votes = parse_int(get("Total_Votes")).value_or(0);
      require(r.upvotes >= 0 && r.upvotes <= r.total_votes, "need 0 <= Upvotes <= Total_Votes",
              ErrorCode::kSchemaMismatch);
      r.user_rating = parse_int(get("Rating"));
      require(!r.user_rating || (*r.user_rating >= 1 && *r.user_rating <= 10),
              "Rating must be in [1, 10]", ErrorCode::kSchemaMismatch);
      if (cols.contains("Sentiment_Score")) r.sentiment_score = parse_amount(get("Sentiment_Score"));
      if (cols.contains("Emotion_Keywords")) r.emotion_keywords = split_list(get("Emotion_Keywords"));
      r.review_id = r.movie_id + "#" + std::to_string(ordinal[r.movie_id]++);
      result.records.push_back(std::move(r));
    } catch (const Error& e) {
      result.rejects.push_back({row.line, e.what()});
    }
  }
  return result;
}

inline void write_reviews(const std::string& path, const std::vector<Review>& reviews) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path, ErrorCode::kIo);
  const bool with_scores = std::any_of(reviews.begin(), reviews.end(),
                                       [](const Review& r) { return r.sentiment_score.has_value(); });
  auto header = review_columns();
  if (with_scores) header.insert(header.end(), optional_review_columns().begin(), optional_review_columns().end());
  csv::write_row(out, header);
  for (const auto& r : reviews) {
    std::vector<std::string> f = {r.movie_id, r.author_id, r.review_date, r.title, r.body,
                                  std::to_string(r.upvotes), std::to_string(r.total_votes),
                                  opt_field(r.user_rating)};
    if (with_scores) {
      f.push_back(opt_field(r.sentiment_score));
      f.push_back(join_list(r.emotion_keywords));
    }
    csv::write_row(out, f);
  }
}

inline void write_rejects(const std::string& path, const std::vector<Reject>& rejects) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path, ErrorCode::kIo);
  csv::write_row(out, {"line", "reason"});
  for (const auto& r : rejects) csv::write_row(out, {std::to_string(r.line), r.reason});
}

}  // namespace mtlfilm::ingest
