#pragma once

#include <span>
#include <vector>

#include "mtlfilm/records.hpp"
#include "mtlfilm/sentiment.hpp"
#include "mtlfilm/sir_dynamics.hpp"

namespace mtlfilm {

/// A review counts as negative when rated 4 or below; unrated reviews fall
/// back to the sign of their lexicon score.
inline bool is_negative_review(const Review& r) {
  if (r.user_rating) return *r.user_rating <= 4;
  return sentiment::stub_analyze(r).sentiment_score < 5.0;
}

inline sir::ReviewTimeline build_timeline(std::span<const Review> reviews) {
  std::vector<sir::TimelineEntry> entries;
  entries.reserve(reviews.size());
  for (const auto& r : reviews) entries.push_back({r.days_since_release, is_negative_review(r), r.author_id});
  return sir::ReviewTimeline(std::move(entries));
}

}  // namespace mtlfilm
