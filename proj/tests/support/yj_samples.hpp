#pragma once

// Samples whose Yeo-Johnson transform at `lambda` is (truncated) normal.
// The inverse only exists on part of the line when lambda < 0 (y < 1/|lambda|)
// or lambda > 2 (y > -1/(lambda - 2)), so the spread is narrowed to keep
// truncation negligible and out-of-domain draws are rejected.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mtlfilm/features.hpp"

namespace oracle {

inline std::vector<double> planted_yeo_johnson_sample(double lambda, std::size_t n, std::uint64_t seed) {
  double hi = std::numeric_limits<double>::infinity(), lo = -hi;
  if (lambda < 0.0) hi = 1.0 / -lambda;
  if (lambda > 2.0) lo = -1.0 / (lambda - 2.0);
  const double sd = std::min({1.0, hi / 4.0, -lo / 4.0});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> out;
  while (out.size() < n) {
    const double y = nd(rng);
    if (y <= lo || y >= hi) continue;
    const double x = mtlfilm::features::yeo_johnson_inverse(y, lambda);
    if (std::isfinite(x)) out.push_back(x);
  }
  return out;
}

}  // namespace oracle
