#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mtlfilm {

/// One film, with the movie-level columns of the dataset schema. Multi-valued
/// text columns (writers, languages, ...) are stored already split.
struct MovieRecord {
  std::string movie_id;
  std::string title;
  std::string director;
  std::vector<std::string> writers;
  std::optional<double> gross_worldwide;
  std::optional<double> opening_weekend;
  std::optional<double> budget;
  std::vector<std::string> languages;
  std::vector<std::string> countries;
  std::vector<std::string> filming_locations;
  std::vector<std::string> production_companies;
  std::optional<int> release_day;
  std::optional<int> release_month;
  int release_year = 0;
  std::optional<double> runtime;
  std::optional<double> official_rating;  // not part of the CSV schema

  bool operator==(const MovieRecord&) const = default;
};

/// One user review. `author_id` is already anonymized.
struct Review {
  std::string review_id;
  std::string movie_id;
  std::string author_id;
  std::string review_date;  // ISO yyyy-mm-dd
  double days_since_release = 0.0;
  std::string title;
  std::string body;
  int upvotes = 0;
  int total_votes = 0;
  std::optional<int> user_rating;
  // Precomputed extractor outputs; when present extraction is bypassed.
  std::optional<double> sentiment_score;
  std::vector<std::string> emotion_keywords;

  bool operator==(const Review&) const = default;
};

}  // namespace mtlfilm
