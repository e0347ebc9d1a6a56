#pragma once

// Planted-signal synthetic corpus. Each film gets a latent quality q that
// drives (a) the positive-word rate of its review bodies, (b) how heavily
// reviews concentrate in the first week, and (c) user ratings. Opening
// weekend revenue is budget * (a + b * driver + noise), where the driver
// blends q with an unobserved draw u as s * q + (1 - s) * u for signal
// strength s, so the success label is recoverable only as far as s allows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mtlfilm/error.hpp"
#include "mtlfilm/ingest.hpp"
#include "mtlfilm/records.hpp"
#include "mtlfilm/sentiment.hpp"
#include "mtlfilm/sir_dynamics.hpp"
#include "mtlfilm/timeline.hpp"

namespace mtlfilm::synth {

struct SyntheticConfig {
  double roi_intercept = 0.3;  // a
  double roi_slope = 0.5;      // b
  double roi_noise_sd = 0.02;
  double quality_min = 0.0;
  double quality_max = 0.8;
  double budget_log_mu = 17.0;
  double budget_log_sigma = 1.0;
  int reviews_min = 20;
  int reviews_max = 80;
  int sentiment_words_min = 6;
  int sentiment_words_max = 10;
  double positive_word_prob_low = 0.1;
  double positive_word_prob_high = 0.9;
  double first_week_share_low = 0.32;
  double first_week_share_high = 0.42;
  double first_week_share_noise_sd = 0.1;
  double late_review_span_days = 60.0;
  double rating_noise_sd = 5.0;
  double unrated_share = 0.05;
  double author_pool_ratio = 0.85;
  int year_min = 2004;
  int year_max = 2024;

  nlohmann::json to_json() const {
    return {{"roi_intercept", roi_intercept},
            {"roi_slope", roi_slope},
            {"roi_noise_sd", roi_noise_sd},
            {"quality_min", quality_min},
            {"quality_max", quality_max},
            {"budget_log_mu", budget_log_mu},
            {"budget_log_sigma", budget_log_sigma},
            {"reviews_min", reviews_min},
            {"reviews_max", reviews_max},
            {"sentiment_words_min", sentiment_words_min},
            {"sentiment_words_max", sentiment_words_max},
            {"positive_word_prob_low", positive_word_prob_low},
            {"positive_word_prob_high", positive_word_prob_high},
            {"first_week_share_low", first_week_share_low},
            {"first_week_share_high", first_week_share_high},
            {"first_week_share_noise_sd", first_week_share_noise_sd},
            {"late_review_span_days", late_review_span_days},
            {"rating_noise_sd", rating_noise_sd},
            {"unrated_share", unrated_share},
            {"author_pool_ratio", author_pool_ratio},
            {"year_min", year_min},
            {"year_max", year_max}};
  }

  static SyntheticConfig from_json(const nlohmann::json& j) {
    SyntheticConfig c;
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    read("roi_intercept", c.roi_intercept);
    read("roi_slope", c.roi_slope);
    read("roi_noise_sd", c.roi_noise_sd);
    read("quality_min", c.quality_min);
    read("quality_max", c.quality_max);
    read("budget_log_mu", c.budget_log_mu);
    read("budget_log_sigma", c.budget_log_sigma);
    read("reviews_min", c.reviews_min);
    read("reviews_max", c.reviews_max);
    read("sentiment_words_min", c.sentiment_words_min);
    read("sentiment_words_max", c.sentiment_words_max);
    read("positive_word_prob_low", c.positive_word_prob_low);
    read("positive_word_prob_high", c.positive_word_prob_high);
    read("first_week_share_low", c.first_week_share_low);
    read("first_week_share_high", c.first_week_share_high);
    read("first_week_share_noise_sd", c.first_week_share_noise_sd);
    read("late_review_span_days", c.late_review_span_days);
    read("rating_noise_sd", c.rating_noise_sd);
    read("unrated_share", c.unrated_share);
    read("author_pool_ratio", c.author_pool_ratio);
    read("year_min", c.year_min);
    read("year_max", c.year_max);
    return c;
  }
};

inline SyntheticConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot read synthetic config " + path, ErrorCode::kIo);
  return SyntheticConfig::from_json(nlohmann::json::parse(in));
}

struct SyntheticCorpus {
  std::vector<MovieRecord> movies;
  std::vector<Review> reviews;
  std::vector<double> latent_quality;  // per movie, for construction checks
};

namespace detail {

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

inline const std::string& pick_weighted(const std::vector<std::pair<std::string, double>>& items,
                                        std::mt19937_64& rng) {
  std::vector<double> w;
  for (const auto& it : items) w.push_back(it.second);
  std::discrete_distribution<std::size_t> d(w.begin(), w.end());
  return items[d(rng)].first;
}

inline std::vector<std::string> words_with_polarity(int polarity) {
  std::vector<std::string> out;
  for (const auto& [w, p] : sentiment::default_lexicon().polarity) {
    if (p == polarity) out.push_back(w);
  }
  std::sort(out.begin(), out.end());  // map iteration order is unspecified
  return out;
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic(int n_movies, double signal_strength, std::uint64_t seed,
                                          const SyntheticConfig& cfg = {}) {
  require(n_movies >= 50, "generate_synthetic requires n_movies >= 50");
  require(signal_strength >= 0.0 && signal_strength <= 1.0, "signal_strength must be in [0, 1]");
  require(cfg.reviews_min >= 1 && cfg.reviews_min <= cfg.reviews_max, "bad review count range");
  require(cfg.quality_max > cfg.quality_min, "bad quality range");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto exponential = [&](double rate) { return std::exponential_distribution<double>(rate)(rng); };

  const auto positive_words = detail::words_with_polarity(+1);
  const auto negative_words = detail::words_with_polarity(-1);
  const std::vector<std::string> focus_words = {"plot", "acting", "visuals", "directing", "music", "story"};
  const std::vector<std::string> fillers = {"the film felt", "honestly it was", "overall quite",
                                            "i found it", "the second half was", "at times"};
  const std::vector<std::pair<std::string, double>> languages = {
      {"English", 0.6}, {"Spanish", 0.1}, {"French", 0.1}, {"Hindi", 0.08}, {"Japanese", 0.07}, {"Korean", 0.05}};
  const std::vector<std::pair<std::string, double>> countries = {
      {"United States", 0.55}, {"United Kingdom", 0.12}, {"France", 0.1}, {"India", 0.08},
      {"Japan", 0.08}, {"Canada", 0.07}};
  const std::vector<std::string> locations = {"Los Angeles", "London", "Vancouver", "Paris", "Mumbai",
                                              "Tokyo", "Budapest", "Atlanta"};

  SyntheticCorpus corpus;
  const int n_directors = std::max(10, n_movies / 3);
  const int n_writers = std::max(20, n_movies / 2);
  const int n_companies = std::max(15, n_movies / 4);

  for (int m = 0; m < n_movies; ++m) {
    MovieRecord movie;
    char id[16];
    std::snprintf(id, sizeof id, "M%05d", m);
    movie.movie_id = id;
    movie.title = "Synthetic Feature " + std::to_string(m);
    movie.director = "Director " + std::to_string(uniform_int(1, n_directors));
    for (int k = uniform_int(1, 3); k > 0; --k) movie.writers.push_back("Writer " + std::to_string(uniform_int(1, n_writers)));
    for (int k = uniform_int(1, 4); k > 0; --k) {
      movie.production_companies.push_back("Studio " + std::to_string(uniform_int(1, n_companies)));
    }
    movie.languages = {detail::pick_weighted(languages, rng)};
    movie.countries = {detail::pick_weighted(countries, rng)};
    movie.filming_locations = {detail::pick(locations, rng)};
    movie.release_year = uniform_int(cfg.year_min, cfg.year_max);
    movie.release_month = uniform_int(1, 12);
    movie.release_day = uniform_int(1, 28);
    movie.runtime = std::round(std::clamp(110.0 + 15.0 * normal(rng), 70.0, 200.0));

    const double quality = cfg.quality_min + (cfg.quality_max - cfg.quality_min) * unit(rng);
    const double unobserved = cfg.quality_min + (cfg.quality_max - cfg.quality_min) * unit(rng);
    const double qn = (quality - cfg.quality_min) / (cfg.quality_max - cfg.quality_min);
    const double budget = std::round(std::exp(cfg.budget_log_mu + cfg.budget_log_sigma * normal(rng)));
    const double driver = signal_strength * quality + (1.0 - signal_strength) * unobserved;
    const double roi = std::max(0.01, cfg.roi_intercept + cfg.roi_slope * driver + cfg.roi_noise_sd * normal(rng));
    movie.budget = budget;
    movie.opening_weekend = std::round(budget * roi);
    movie.gross_worldwide = std::round(*movie.opening_weekend * (2.5 + 1.5 * unit(rng)));
    corpus.latent_quality.push_back(quality);

    const int n_reviews = uniform_int(cfg.reviews_min, cfg.reviews_max);
    const double fw_share = std::clamp(cfg.first_week_share_low +
                                           (cfg.first_week_share_high - cfg.first_week_share_low) * qn +
                                           cfg.first_week_share_noise_sd * normal(rng),
                                       0.05, 0.9);
    const double early_rate = n_reviews * fw_share / sir::kFirstWeekDays;
    const double late_rate = n_reviews * (1.0 - fw_share) / cfg.late_review_span_days;
    const double p_positive = cfg.positive_word_prob_low +
                              (cfg.positive_word_prob_high - cfg.positive_word_prob_low) * qn;
    const int pool = std::max(1, static_cast<int>(std::ceil(n_reviews * cfg.author_pool_ratio)));
    const auto release = ingest::release_date(movie);

    // Redraw the film's reviews until the first-week counts are consistent
    // with a valid initial SIR state.
    std::vector<Review> reviews;
    for (;;) {
      reviews.clear();
      double t = 0.0;
      for (int k = 0; k < n_reviews; ++k) {
        const double gap = exponential(early_rate);
        if (t < sir::kFirstWeekDays && t + gap < sir::kFirstWeekDays) {
          t += gap;
        } else {
          t = std::max(t, sir::kFirstWeekDays) + exponential(late_rate);
        }
        Review r;
        r.movie_id = movie.movie_id;
        r.review_id = movie.movie_id + "#" + std::to_string(k);
        r.author_id = "reviewer_" + std::string(id) + "_" + std::to_string(uniform_int(1, pool));
        const int day = static_cast<int>(std::floor(t));
        r.days_since_release = day;
        r.review_date = ingest::format_date(release + std::chrono::days{day});
        std::string body;
        const int n_words = uniform_int(cfg.sentiment_words_min, cfg.sentiment_words_max);
        body += "The " + detail::pick(focus_words, rng) + " stood out.";
        for (int w = 0; w < n_words; ++w) {
          const bool pos = unit(rng) < p_positive;
          body += " " + detail::pick(fillers, rng) + " " +
                  detail::pick(pos ? positive_words : negative_words, rng) + ".";
        }
        r.title = "Review " + std::to_string(k);
        r.body = body;
        r.total_votes = uniform_int(0, 50);
        r.upvotes = std::binomial_distribution<int>(r.total_votes, 0.6)(rng);
        if (unit(rng) >= cfg.unrated_share) {
          const double rating = 1.0 + 9.0 * qn + cfg.rating_noise_sd * normal(rng);
          r.user_rating = static_cast<int>(std::clamp(std::round(rating), 1.0, 10.0));
        }
        reviews.push_back(std::move(r));
      }
      const auto counts = sir::count_timeline(build_timeline(reviews));
      if (counts.first_week_commenters + counts.first_week_negative_reviewers <= counts.total_reviewers) break;
    }
    corpus.reviews.insert(corpus.reviews.end(), std::make_move_iterator(reviews.begin()),
                          std::make_move_iterator(reviews.end()));
    corpus.movies.push_back(std::move(movie));
  }
  return corpus;
}

}  // namespace mtlfilm::synth
