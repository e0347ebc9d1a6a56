#pragma once

// Numerical checks on the network shared by unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include "mtlfilm/mtl_net.hpp"

namespace checks {

using namespace mtlfilm::mtl;

struct RandomBatch {
  std::size_t width;
  std::vector<double> x;
  std::vector<int> labels;
  std::vector<double> targets;

  Batch batch() const { return Batch{x, labels, targets, width}; }
};

inline RandomBatch random_batch(std::size_t width, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  RandomBatch b{width, {}, {}, {}};
  for (std::size_t i = 0; i < n * width; ++i) b.x.push_back(nd(rng));
  for (std::size_t i = 0; i < n; ++i) {
    b.labels.push_back(static_cast<int>(i % 2));
    b.targets.push_back(nd(rng));
  }
  return b;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Central differences of loss().total against backward(), over every
/// parameter. With dropout on, every evaluation replays the same mask stream
/// so the objective is fixed. Relative error is |a - n| / (|n| + floor).
inline GradCheckResult gradient_check(const NetworkParams& params, const RandomBatch& data, const NetworkConfig& cfg,
                                      Mode mode, double h = 1e-5, double floor = 1e-8) {
  const auto batch = data.batch();
  auto objective = [&](const NetworkParams& p) {
    std::mt19937_64 rng(99);
    return loss(forward_batch(batch, p, cfg, mode, &rng), batch, p, cfg).total;
  };
  std::mt19937_64 rng(99);
  const auto analytic = backward(forward_batch(batch, params, cfg, mode, &rng), batch, params, cfg);
  GradCheckResult r;
  NetworkParams probe = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double orig = probe.values()[k];
    probe.values()[k] = orig + h;
    const double up = objective(probe);
    probe.values()[k] = orig - h;
    const double down = objective(probe);
    probe.values()[k] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.values()[k];
    const double rel = std::abs(a - numeric) / (std::abs(numeric) + floor);
    ++r.checked;
    if (rel > r.max_relative_error) {
      r.max_relative_error = rel;
      r.worst_index = k;
    }
  }
  return r;
}

struct FixedPointResult {
  double u_clf, u_reg;        // learned log-variances
  double target_clf, target_reg;  // ln of the frozen task losses
  std::size_t steps;
};

/// Freezes every weight and the batch (so BCE and MSE are constants) and runs
/// Adam on the two log-variances alone.
inline FixedPointResult uncertainty_fixed_point(const NetworkParams& start, const RandomBatch& data,
                                                const NetworkConfig& cfg, std::size_t steps, double lr) {
  NetworkParams params = start;
  const auto batch = data.batch();
  const auto pass = forward_batch(batch, params, cfg, Mode::kEval);
  const auto frozen = loss(pass, batch, params, cfg);
  std::vector<double> u{params.log_var_clf(), params.log_var_reg()};
  Adam adam(2, lr);
  for (std::size_t s = 0; s < steps; ++s) {
    params.log_var_clf() = u[0];
    params.log_var_reg() = u[1];
    const auto g = backward(pass, batch, params, cfg);
    adam.step(u, {g.log_var_clf(), g.log_var_reg()});
  }
  return {u[0], u[1], std::log(frozen.bce), std::log(frozen.mse), steps};
}

}  // namespace checks
