#pragma once

// SIR information-diffusion model on a population normalized to N = 1:
// forward Euler simulation, an integral-form residual check, closed-form
// parameter estimators from review timelines, and derived virality ratios.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mtlfilm/error.hpp"

namespace mtlfilm::sir {

inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kGammaFloor = 1e-6;
inline constexpr double kFirstWeekDays = 7.0;
inline constexpr double kDefaultDt = 0.01;
inline constexpr double kDefaultHorizon = 90.0;

struct SIRState {
  double s = 1.0;
  double i = 0.0;
  double r = 0.0;
  double t = 0.0;

  bool valid() const {
    auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    return in_unit(s) && in_unit(i) && in_unit(r) && std::isfinite(t) && t >= 0.0 &&
           std::abs(s + i + r - 1.0) <= kSimplexTolerance;
  }
};

struct SIRParams {
  double beta = 0.0;   // contact rate per day
  double gamma = 1.0;  // recovery rate per day

  bool valid() const {
    return std::isfinite(beta) && std::isfinite(gamma) && beta >= 0.0 && gamma > 0.0;
  }
};

struct SIRTrajectory {
  std::vector<SIRState> states;
  double dt = kDefaultDt;
};

/// Ratios derived from the fitted parameters plus two readings off the
/// simulated infected curve. The s0-denominated ratios are empty when s0 = 0.
struct SIRFeatures {
  std::optional<double> i0_s0_ratio;
  std::optional<double> r0_s0_ratio;
  double basic_reproduction_number = 0.0;
  double effective_contact_rate = 0.0;
  double peak_infected = 0.0;
  double time_to_peak = 0.0;
};

struct TimelineEntry {
  double days_since_release = 0.0;
  bool is_negative = false;
  std::string author_id;
};

/// Reviews of one film. Totals are derived from the entries: comments are
/// raw entries, reviewers are distinct authors.
class ReviewTimeline {
 public:
  explicit ReviewTimeline(std::vector<TimelineEntry> entries) : entries_(std::move(entries)) {
    require(!entries_.empty(), "review timeline must not be empty");
    for (const auto& e : entries_) {
      require(std::isfinite(e.days_since_release) && e.days_since_release >= 0.0,
              "review timestamps must be >= 0 days since release");
    }
  }

  const std::vector<TimelineEntry>& entries() const { return entries_; }

 private:
  std::vector<TimelineEntry> entries_;
};

/// Aggregate counts feeding the closed-form estimators.
struct TimelineCounts {
  std::size_t first_week_commenters = 0;           // distinct authors
  std::size_t first_week_negative_reviewers = 0;   // distinct authors
  std::size_t first_week_comments = 0;             // raw reviews
  std::size_t first_week_negative_comments = 0;    // raw reviews
  std::size_t total_reviewers = 0;
  std::size_t total_comments = 0;
};

inline TimelineCounts count_timeline(const ReviewTimeline& timeline) {
  TimelineCounts c;
  std::set<std::string> authors, fw_authors, fw_negative_authors;
  for (const auto& e : timeline.entries()) {
    authors.insert(e.author_id);
    ++c.total_comments;
    if (e.days_since_release < kFirstWeekDays) {
      ++c.first_week_comments;
      fw_authors.insert(e.author_id);
      if (e.is_negative) {
        ++c.first_week_negative_comments;
        fw_negative_authors.insert(e.author_id);
      }
    }
  }
  c.total_reviewers = authors.size();
  c.first_week_commenters = fw_authors.size();
  c.first_week_negative_reviewers = fw_negative_authors.size();
  return c;
}

inline SIRState euler_step(const SIRState& state, const SIRParams& params, double dt) {
  require(dt > 0.0 && std::isfinite(dt), "euler_step requires dt > 0");
  require(state.valid(), "euler_step requires a state on the simplex");
  require(params.beta >= 0.0 && params.gamma >= 0.0, "euler_step requires nonnegative rates");

  const double infection = params.beta * state.s * state.i * dt;
  const double recovery = params.gamma * state.i * dt;
  double s = std::clamp(state.s - infection, 0.0, 1.0);
  double i = std::clamp(state.i + infection - recovery, 0.0, 1.0);
  double r = std::clamp(state.r + recovery, 0.0, 1.0);
  const double total = s + i + r;
  return SIRState{s / total, i / total, r / total, state.t + dt};
}

inline std::size_t step_count(double dt, double horizon) {
  return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
}

inline SIRTrajectory simulate(const SIRState& initial, const SIRParams& params, double dt,
                              double horizon) {
  require(dt > 0.0 && horizon > 0.0 && dt <= horizon, "simulate requires 0 < dt <= horizon");
  require(initial.valid(), "simulate requires a valid initial state");
  const std::size_t steps = step_count(dt, horizon);
  SIRTrajectory traj;
  traj.dt = dt;
  traj.states.reserve(steps + 1);
  traj.states.push_back(initial);
  SIRState current = initial;
  for (std::size_t k = 1; k <= steps; ++k) {
    current = euler_step(current, params, dt);
    // Timestamps are k * dt rather than accumulated to avoid drift.
    current.t = initial.t + static_cast<double>(k) * dt;
    traj.states.push_back(current);
  }
  return traj;
}

struct IntegralResiduals {
  double susceptible = 0.0;  // |S(T) - S0 exp(-beta * int I)|
  double infected = 0.0;     // |I(T) - I0 - beta * int S I + gamma * int I|
  double recovered = 0.0;    // |R(T) - R0 - gamma * int I|

  double max() const { return std::max({susceptible, infected, recovered}); }
};

/// Checks the Euler trajectory against the integral form of the system at the
/// final time, using trapezoidal quadrature of the integrands.
inline IntegralResiduals validate_trajectory(const SIRTrajectory& traj, const SIRParams& params) {
  require(traj.states.size() >= 3, "validate_trajectory needs at least 3 states");
  double int_i = 0.0, int_si = 0.0;
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const auto& a = traj.states[k - 1];
    const auto& b = traj.states[k];
    const double h = b.t - a.t;
    int_i += 0.5 * h * (a.i + b.i);
    int_si += 0.5 * h * (a.s * a.i + b.s * b.i);
  }
  const auto& first = traj.states.front();
  const auto& last = traj.states.back();
  IntegralResiduals res;
  res.susceptible = std::abs(last.s - first.s * std::exp(-params.beta * int_i));
  res.infected = std::abs(last.i - first.i - params.beta * int_si + params.gamma * int_i);
  res.recovered = std::abs(last.r - first.r - params.gamma * int_i);
  return res;
}

inline SIRState estimate_initial_conditions(const TimelineCounts& c) {
  require(c.total_reviewers > 0 && c.total_comments > 0, "timeline totals must be positive");
  require(c.total_reviewers <= c.total_comments, "reviewers cannot exceed comments");
  require(c.first_week_commenters <= c.total_reviewers &&
              c.first_week_negative_reviewers <= c.total_reviewers,
          "first-week counts cannot exceed total reviewers");
  const double n = static_cast<double>(c.total_reviewers);
  const double i0 = static_cast<double>(c.first_week_commenters) / n;
  const double r0 = static_cast<double>(c.first_week_negative_reviewers) / n;
  // Consistent counts never overflow the simplex; treat it as corrupt input.
  require(c.first_week_commenters + c.first_week_negative_reviewers <= c.total_reviewers,
          "inconsistent counts: I0 + R0 > 1");
  return SIRState{std::max(0.0, 1.0 - i0 - r0), i0, r0, 0.0};
}

inline SIRState estimate_initial_conditions(const ReviewTimeline& timeline) {
  return estimate_initial_conditions(count_timeline(timeline));
}

struct RateEstimate {
  SIRParams params;
  bool gamma_floored = false;
};

inline RateEstimate estimate_rates(const TimelineCounts& c) {
  require(c.total_comments > 0, "estimate_rates requires total_comments > 0");
  require(c.first_week_comments <= c.total_comments &&
              c.first_week_negative_comments <= c.first_week_comments,
          "first-week comment counts are inconsistent");
  const double n = static_cast<double>(c.total_comments);
  RateEstimate est;
  est.params.beta = static_cast<double>(c.first_week_comments) / n;
  est.params.gamma = static_cast<double>(c.first_week_negative_comments) / n;
  if (est.params.gamma < kGammaFloor) {
    est.params.gamma = kGammaFloor;
    est.gamma_floored = true;
  }
  return est;
}

inline RateEstimate estimate_rates(const ReviewTimeline& timeline) {
  return estimate_rates(count_timeline(timeline));
}

inline SIRFeatures derived_features(const SIRState& initial, const SIRParams& params,
                                    const SIRTrajectory& traj) {
  require(params.valid(), "derived_features requires beta >= 0 and gamma > 0");
  require(!traj.states.empty(), "derived_features requires a nonempty trajectory");
  SIRFeatures f;
  if (initial.s > 0.0) {
    f.i0_s0_ratio = initial.i / initial.s;
    f.r0_s0_ratio = initial.r / initial.s;
  }
  f.basic_reproduction_number = params.beta / params.gamma;
  f.effective_contact_rate = params.beta * initial.s;
  f.peak_infected = traj.states.front().i;
  f.time_to_peak = traj.states.front().t - initial.t;
  for (const auto& st : traj.states) {
    if (st.i > f.peak_infected) {
      f.peak_infected = st.i;
      f.time_to_peak = st.t - initial.t;
    }
  }
  return f;
}

}  // namespace mtlfilm::sir
