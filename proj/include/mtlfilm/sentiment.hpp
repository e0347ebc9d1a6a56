#pragma once

// Per-review multidimensional sentiment: prompt construction, response
// parsing, a deterministic lexicon extractor, and exponentially decayed
// engagement-weighted aggregation over time.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mtlfilm/error.hpp"
#include "mtlfilm/records.hpp"

namespace mtlfilm::sentiment {

inline constexpr std::size_t kEmotionKeywordCount = 5;
inline constexpr double kMinScore = 1.0;
inline constexpr double kMaxScore = 10.0;
inline constexpr double kNeutralScore = 5.5;
inline constexpr double kPositiveThreshold = 6.0;

struct SentimentVector {
  double sentiment_score = kNeutralScore;
  std::vector<std::string> emotion_keywords = std::vector<std::string>(kEmotionKeywordCount);
  std::string primary_emotion;
  std::string review_focus;
  std::string bias_analysis;
  std::string summary;
  bool score_clamped = false;
  bool fallback_used = false;

  bool operator==(const SentimentVector&) const = default;
};

struct AggregationConfig {
  double lambda_decay = 0.05;     // per day
  double weight_smoothing = 1.0;  // Laplace constant for helpfulness weights
};

struct AggregateSentiment {
  double s_t = 0.0;
  double mean_score = 0.0;
  double score_std = 0.0;
  double positive_share = 0.0;
  std::size_t review_count = 0;
};

namespace detail {

inline std::string or_na(const std::string& s) { return s.empty() ? "N/A" : s; }

inline std::string join(const std::vector<std::string>& parts) {
  if (parts.empty()) return "N/A";
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k) out += ", ";
    out += parts[k];
  }
  return out;
}

// "$1,234,567" style rendering, rounded to whole units.
inline std::string money(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "N/A";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f", std::abs(*v));
  std::string digits(buf), grouped;
  for (std::size_t k = 0; k < digits.size(); ++k) {
    if (k && (digits.size() - k) % 3 == 0) grouped += ',';
    grouped += digits[k];
  }
  return std::string(*v < 0 ? "-$" : "$") + grouped;
}

template <typename T>
std::string number_or_na(std::optional<T> v) {
  if (!v) return "N/A";
  std::ostringstream os;
  os << *v;
  return os.str();
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace detail

/// Renders the extraction prompt: role, movie information, review text and the
/// analysis request, in that order. Missing values render as "N/A".
inline std::string build_prompt(const MovieRecord& movie, const Review& review) {
  std::optional<double> roi;
  if (movie.opening_weekend && movie.budget && *movie.budget > 0) {
    roi = *movie.opening_weekend / *movie.budget;
  }
  char roi_buf[32] = "N/A";
  if (roi) std::snprintf(roi_buf, sizeof roi_buf, "%.2f", *roi);

  std::ostringstream p;
  p << "You are a professional film critic and sentiment analysis expert. Please analyze the "
       "following movie review and provide a detailed sentiment analysis.\n\n";
  p << "MOVIE INFORMATION:\n";
  p << "- Title: " << detail::or_na(movie.title) << "\n";
  p << "- Director: " << detail::or_na(movie.director) << "\n";
  p << "- Writers: " << detail::join(movie.writers) << "\n";
  p << "- Release Year: " << (movie.release_year > 0 ? std::to_string(movie.release_year) : "N/A")
    << "\n";
  p << "- Release Month: " << detail::number_or_na(movie.release_month) << "\n";
  p << "- Release Day: " << detail::number_or_na(movie.release_day) << "\n";
  p << "- Budget: " << detail::money(movie.budget) << "\n";
  p << "- Opening Weekend (US/Canada): " << detail::money(movie.opening_weekend) << "\n";
  p << "- Worldwide Gross: " << detail::money(movie.gross_worldwide) << "\n";
  p << "- ROI: " << roi_buf << "\n";
  p << "- IMDb Rating: " << detail::number_or_na(movie.official_rating) << "/10\n";
  p << "- Language: " << detail::join(movie.languages) << "\n";
  p << "- Country of Origin: " << detail::join(movie.countries) << "\n";
  p << "- Filming Locations: " << detail::join(movie.filming_locations) << "\n";
  p << "- Production Companies: " << detail::join(movie.production_companies) << "\n";
  p << "- Runtime: " << detail::number_or_na(movie.runtime) << "\n\n";
  p << "REVIEW TEXT: \"" << review.body << "\"\n\n";
  p << "Analyze this review's sentiment and attitude. Return ONLY a JSON object with the "
       "following keys:\n";
  p << "1. sentiment_score: Score from 1-10 (1=extremely negative, 10=extremely positive)\n";
  p << "2. emotion_keywords: List of 5 keywords/phrases that best represent the emotional tone\n";
  p << "3. primary_emotion: Main emotion expressed (e.g., admiration, disappointment, anger, "
       "surprise)\n";
  p << "4. review_focus: What aspects the review focuses on (e.g., plot, acting, visuals, "
       "directing)\n";
  p << "5. bias_analysis: Analysis of potential biases or subjective factors\n";
  p << "6. summary: Brief summary (50 words or less)\n\n";
  p << "Return ONLY the JSON result with no additional text or explanation.";
  return p.str();
}

inline nlohmann::json to_json(const SentimentVector& v) {
  return nlohmann::json{{"sentiment_score", v.sentiment_score},
                        {"emotion_keywords", v.emotion_keywords},
                        {"primary_emotion", v.primary_emotion},
                        {"review_focus", v.review_focus},
                        {"bias_analysis", v.bias_analysis},
                        {"summary", v.summary}};
}

/// Parses an extractor reply. Markdown code fences and text around the JSON
/// object are tolerated; a missing or non-numeric score is not.
inline SentimentVector parse_extractor_response(std::string_view raw) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw Error(ErrorCode::kMalformedResponse, "no JSON object in extractor response");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.substr(open, close - open + 1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, e.what());
  }
  if (!j.is_object() || !j.contains("sentiment_score")) {
    throw Error(ErrorCode::kMalformedResponse, "missing sentiment_score");
  }
  SentimentVector v;
  const auto& score = j["sentiment_score"];
  double value = 0.0;
  if (score.is_number()) {
    value = score.get<double>();
  } else if (score.is_string()) {
    try {
      std::size_t used = 0;
      const auto text = score.get<std::string>();
      value = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kMalformedResponse, "sentiment_score is not numeric");
    }
  } else {
    throw Error(ErrorCode::kMalformedResponse, "sentiment_score is not numeric");
  }
  if (!std::isfinite(value)) throw Error(ErrorCode::kMalformedResponse, "non-finite score");
  v.sentiment_score = std::clamp(value, kMinScore, kMaxScore);
  v.score_clamped = v.sentiment_score != value;

  auto text_field = [&](const char* key) -> std::string {
    if (!j.contains(key)) return {};
    const auto& f = j[key];
    return f.is_string() ? f.get<std::string>() : f.dump();
  };
  v.emotion_keywords.clear();
  if (j.contains("emotion_keywords")) {
    const auto& kw = j["emotion_keywords"];
    if (kw.is_array()) {
      for (const auto& k : kw) v.emotion_keywords.push_back(k.is_string() ? k.get<std::string>() : k.dump());
    } else if (kw.is_string()) {
      std::stringstream ss(kw.get<std::string>());
      std::string item;
      while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        v.emotion_keywords.push_back(item);
      }
    }
  }
  v.emotion_keywords.resize(kEmotionKeywordCount);
  v.primary_emotion = text_field("primary_emotion");
  v.review_focus = text_field("review_focus");
  v.bias_analysis = text_field("bias_analysis");
  v.summary = text_field("summary");
  return v;
}

/// What an extractor sees for one review: the rendered prompt plus the
/// structured inputs it was rendered from.
struct ExtractionRequest {
  const std::string& prompt;
  const Review& review;
  const MovieRecord& movie;
};

class Extractor {
 public:
  virtual ~Extractor() = default;
  /// Returns the raw textual reply; transport failures throw
  /// Error(kExtractorUnavailable).
  virtual std::string respond(const ExtractionRequest& request) = 0;
};

struct Lexicon {
  std::unordered_map<std::string, int> polarity;  // +1 positive, -1 negative
  std::unordered_map<std::string, std::string> focus;
};

inline const Lexicon& default_lexicon() {
  static const Lexicon lex = [] {
    Lexicon l;
    for (const char* w : {"innovative", "captivating", "brilliant", "masterpiece", "excellent",
                          "gripping", "stunning", "moving", "fresh", "delightful", "thrilling",
                          "superb", "wonderful", "beautiful", "enjoyable", "compelling",
                          "memorable", "clever", "charming", "powerful"}) {
      l.polarity[w] = +1;
    }
    for (const char* w : {"disappointing", "predictable", "boring", "dull", "tedious",
                          "mediocre", "forgettable", "awful", "terrible", "weak", "bland",
                          "messy", "clumsy", "overlong", "lifeless", "confusing", "shallow",
                          "waste", "poor", "cliched"}) {
      l.polarity[w] = -1;
    }
    for (const char* w : {"plot", "story", "script", "twist", "ending"}) l.focus[w] = "plot";
    for (const char* w : {"acting", "cast", "performance", "performances", "actor", "actress"}) {
      l.focus[w] = "acting";
    }
    for (const char* w : {"visuals", "cinematography", "effects", "visual", "camera"}) {
      l.focus[w] = "visuals";
    }
    for (const char* w : {"directing", "director", "direction", "pacing"}) l.focus[w] = "directing";
    for (const char* w : {"music", "score", "soundtrack"}) l.focus[w] = "music";
    return l;
  }();
  return lex;
}

/// Signed-lexicon score mapped affinely onto [1, 10]; with no lexicon hits
/// it backs off to the user rating, else to the neutral midpoint.
inline SentimentVector stub_analyze(const Review& review, const Lexicon& lexicon = default_lexicon()) {
  const auto words = detail::tokenize(review.body);
  int positive = 0, negative = 0;
  std::vector<std::string> hits;
  std::unordered_map<std::string, int> focus_counts;
  std::vector<std::string> focus_order;
  for (const auto& w : words) {
    if (auto it = lexicon.polarity.find(w); it != lexicon.polarity.end()) {
      (it->second > 0 ? positive : negative) += 1;
      if (std::find(hits.begin(), hits.end(), w) == hits.end()) hits.push_back(w);
    }
    if (auto it = lexicon.focus.find(w); it != lexicon.focus.end()) {
      if (focus_counts[it->second]++ == 0) focus_order.push_back(it->second);
    }
  }
  SentimentVector v;
  double net = 0.0;
  if (positive + negative > 0) {
    net = static_cast<double>(positive - negative) / static_cast<double>(positive + negative);
    v.sentiment_score = kNeutralScore + 4.5 * net;
  } else if (review.user_rating) {
    v.sentiment_score = static_cast<double>(*review.user_rating);
    net = (v.sentiment_score - kNeutralScore) / 4.5;
  } else {
    v.sentiment_score = kNeutralScore;
  }
  hits.resize(std::min(hits.size(), kEmotionKeywordCount));
  v.emotion_keywords = hits;
  v.emotion_keywords.resize(kEmotionKeywordCount, "neutral");
  v.primary_emotion = net > 0.2 ? "admiration" : (net < -0.2 ? "disappointment" : "ambivalence");
  if (!focus_order.empty()) {
    v.review_focus = *std::max_element(focus_order.begin(), focus_order.end(),
                                       [&](const auto& a, const auto& b) {
                                         return focus_counts[a] < focus_counts[b];
                                       });
  } else {
    v.review_focus = "general";
  }
  v.bias_analysis = "lexicon stub: no bias assessment";
  std::string summary;
  std::istringstream body(review.body);
  std::string word;
  for (int n = 0; n < 25 && body >> word; ++n) summary += (n ? " " : "") + word;
  v.summary = summary;
  return v;
}

/// Deterministic offline extractor that answers in the same JSON shape a
/// remote model would.
class StubExtractor final : public Extractor {
 public:
  std::string respond(const ExtractionRequest& request) override {
    return to_json(stub_analyze(request.review)).dump();
  }
};

struct ExtractPolicy {
  int max_retries = 2;
  bool fallback_to_stub = true;
};

inline SentimentVector extract(const Review& review, const MovieRecord& movie, Extractor& extractor,
                               const ExtractPolicy& policy = {}) {
  const std::string prompt = build_prompt(movie, review);
  const ExtractionRequest request{prompt, review, movie};
  std::string last_error = "no attempts made";
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    try {
      return parse_extractor_response(extractor.respond(request));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kMalformedResponse && e.code() != ErrorCode::kExtractorUnavailable) {
        throw;
      }
      last_error = e.what();
    }
  }
  if (!policy.fallback_to_stub) {
    throw Error(ErrorCode::kExtractorUnavailable,
                "retries exhausted for review " + review.review_id + ": " + last_error);
  }
  StubExtractor stub;
  auto v = parse_extractor_response(stub.respond(request));
  v.fallback_used = true;
  return v;
}

/// Helpfulness weight in (0, 1), defined even for reviews without votes.
inline double engagement_weight(int upvotes, int total_votes, double smoothing) {
  return (static_cast<double>(upvotes) + smoothing) /
         (static_cast<double>(total_votes) + 2.0 * smoothing);
}

struct ScoredReview {
  double score = kNeutralScore;
  double days_since_release = 0.0;
  int upvotes = 0;
  int total_votes = 0;
};

inline AggregateSentiment aggregate_temporal(std::span<const ScoredReview> reviews, double t,
                                             const AggregationConfig& config = {}) {
  require(config.lambda_decay >= 0.0, "lambda_decay must be >= 0");
  require(config.weight_smoothing > 0.0, "weight_smoothing must be > 0");
  AggregateSentiment agg;
  agg.review_count = reviews.size();
  if (reviews.empty()) return agg;
  double sum = 0.0, positive = 0.0;
  for (const auto& r : reviews) {
    require(r.days_since_release <= t, "review timestamp after aggregation time");
    const double w = engagement_weight(r.upvotes, r.total_votes, config.weight_smoothing);
    agg.s_t += w * r.score * std::exp(-config.lambda_decay * (t - r.days_since_release));
    sum += r.score;
    if (r.score >= kPositiveThreshold) positive += 1.0;
  }
  const double n = static_cast<double>(reviews.size());
  agg.mean_score = sum / n;
  double ss = 0.0;
  for (const auto& r : reviews) ss += (r.score - agg.mean_score) * (r.score - agg.mean_score);
  agg.score_std = std::sqrt(ss / n);
  agg.positive_share = positive / n;
  return agg;
}

/// A persisted per-review extraction result.
struct SentimentRecord {
  std::string review_id;
  std::string movie_id;
  std::string timestamp;
  SentimentVector vector;
};

inline void write_jsonl(const std::string& path, std::span<const SentimentRecord> records) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path, ErrorCode::kIo);
  for (const auto& r : records) {
    auto j = to_json(r.vector);
    j["review_id"] = r.review_id;
    j["movie_id"] = r.movie_id;
    j["timestamp"] = r.timestamp;
    out << j.dump() << '\n';
  }
}

inline std::vector<SentimentRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read " + path, ErrorCode::kIo);
  std::vector<SentimentRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SentimentRecord r;
    r.vector = parse_extractor_response(line);
    const auto j = nlohmann::json::parse(line);
    r.review_id = j.value("review_id", "");
    r.movie_id = j.value("movie_id", "");
    r.timestamp = j.value("timestamp", "");
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace mtlfilm::sentiment
