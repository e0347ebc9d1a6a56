#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mtlfilm/sir_dynamics.hpp"
#include "support/expect_code.hpp"

using namespace mtlfilm;
using namespace mtlfilm::sir;

namespace {

const SIRState kMeanState{0.82, 0.14, 0.04, 0.0};
const SIRParams kSuccess{0.10, 0.03};

TimelineEntry entry(double day, bool negative, std::string author) {
  return TimelineEntry{day, negative, std::move(author)};
}

// Max-norm distance between a trajectory and a finer reference, compared on the coarse grid.
double grid_distance(const SIRTrajectory& coarse, const SIRTrajectory& fine) {
  const auto stride = static_cast<std::size_t>(std::llround(coarse.dt / fine.dt));
  double d = 0.0;
  for (std::size_t k = 0; k < coarse.states.size(); ++k) {
    const auto& a = coarse.states[k];
    const auto& b = fine.states[k * stride];
    d = std::max({d, std::abs(a.s - b.s), std::abs(a.i - b.i), std::abs(a.r - b.r)});
  }
  return d;
}

}  // namespace

TEST(EulerStep, MeanStateArithmetic) {
  const auto next = euler_step(kMeanState, kSuccess, 1.0);
  EXPECT_NEAR(next.s, 0.80852, 1e-12);
  EXPECT_NEAR(next.i, 0.14728, 1e-12);
  EXPECT_NEAR(next.r, 0.0442, 1e-12);
  EXPECT_DOUBLE_EQ(next.t, 1.0);
}

TEST(EulerStep, NoInfectedIsFixedPoint) {
  const SIRState s{1.0, 0.0, 0.0, 0.0};
  const auto next = euler_step(s, SIRParams{0.7, 0.2}, 1.0);
  EXPECT_EQ(next.s, 1.0);
  EXPECT_EQ(next.i, 0.0);
  EXPECT_EQ(next.r, 0.0);
}

TEST(EulerStep, NoSusceptiblesDecays) {
  const auto next = euler_step(SIRState{0.0, 0.5, 0.5, 0.0}, SIRParams{0.2, 0.1}, 1.0);
  EXPECT_NEAR(next.s, 0.0, 1e-15);
  EXPECT_NEAR(next.i, 0.45, 1e-12);
  EXPECT_NEAR(next.r, 0.55, 1e-12);
}

TEST(EulerStep, RejectsBadArguments) {
  EXPECT_ERROR_CODE(euler_step(kMeanState, kSuccess, 0.0), ErrorCode::kContractViolation);
  EXPECT_ERROR_CODE(euler_step(kMeanState, kSuccess, -1.0), ErrorCode::kContractViolation);
  EXPECT_ERROR_CODE(euler_step(SIRState{0.5, 0.5, 0.5, 0.0}, kSuccess, 1.0), ErrorCode::kContractViolation);
  EXPECT_ERROR_CODE(euler_step(SIRState{-0.1, 0.6, 0.5, 0.0}, kSuccess, 1.0), ErrorCode::kContractViolation);
}

TEST(EulerStep, ClampsOvershootBackOntoSimplex) {
  // A huge step drives s negative before clamping.
  const auto next = euler_step(SIRState{0.5, 0.5, 0.0, 0.0}, SIRParams{10.0, 0.0}, 1.0);
  EXPECT_TRUE(next.valid());
  EXPECT_GE(next.s, 0.0);
}

TEST(Simulate, LengthAndConservation) {
  const auto traj = simulate(kMeanState, kSuccess, 0.01, 30.0);
  ASSERT_EQ(traj.states.size(), 3001u);
  EXPECT_EQ(traj.states.front().s, kMeanState.s);
  EXPECT_EQ(traj.states.front().i, kMeanState.i);
  EXPECT_EQ(traj.states.front().r, kMeanState.r);
  for (const auto& st : traj.states) EXPECT_NEAR(st.s + st.i + st.r, 1.0, 1e-9);
  EXPECT_NEAR(traj.states.back().t, 30.0, 1e-9);
}

TEST(Simulate, NonDivisibleHorizonRoundsUp) {
  EXPECT_EQ(simulate(kMeanState, kSuccess, 0.4, 1.0).states.size(), 4u);
}

TEST(Simulate, ConsecutiveStatesAreEulerSteps) {
  const auto traj = simulate(kMeanState, kSuccess, 0.5, 10.0);
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const auto expect = euler_step(traj.states[k - 1], kSuccess, 0.5);
    EXPECT_DOUBLE_EQ(traj.states[k].s, expect.s);
    EXPECT_DOUBLE_EQ(traj.states[k].i, expect.i);
  }
}

TEST(Simulate, SuperThresholdHasInteriorPeak) {
  const auto traj = simulate(kMeanState, kSuccess, 0.01, 90.0);
  const auto f = derived_features(kMeanState, kSuccess, traj);
  EXPECT_GT(f.time_to_peak, 0.0);
  EXPECT_LT(f.time_to_peak, 90.0);
  EXPECT_GT(f.peak_infected, kMeanState.i);
  EXPECT_LT(traj.states.back().i, f.peak_infected);
}

TEST(Simulate, SubThresholdIsNonincreasing) {
  const auto traj = simulate(kMeanState, SIRParams{0.0252, 0.03}, 0.01, 90.0);
  for (std::size_t k = 1; k < traj.states.size(); ++k) EXPECT_LE(traj.states[k].i, traj.states[k - 1].i + 1e-15);
}

TEST(Simulate, RejectsBadArguments) {
  EXPECT_ERROR_CODE(simulate(kMeanState, kSuccess, 0.0, 30.0), ErrorCode::kContractViolation);
  EXPECT_ERROR_CODE(simulate(kMeanState, kSuccess, 1.0, 0.0), ErrorCode::kContractViolation);
  EXPECT_ERROR_CODE(simulate(kMeanState, kSuccess, 2.0, 1.0), ErrorCode::kContractViolation);
}

TEST(SimulateProperty, MonotoneCompartmentsAcrossRandomInputs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    double s = u(rng), i = u(rng), r = u(rng);
    const double tot = s + i + r;
    const SIRState init{s / tot, i / tot, 1.0 - s / tot - i / tot, 0.0};
    if (!init.valid()) continue;
    const SIRParams p{2.0 * u(rng), u(rng)};
    const auto traj = simulate(init, p, 0.01, 5.0);
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
      ASSERT_LE(traj.states[k].s, traj.states[k - 1].s + 1e-15);
      ASSERT_GE(traj.states[k].r, traj.states[k - 1].r - 1e-15);
      ASSERT_NEAR(traj.states[k].s + traj.states[k].i + traj.states[k].r, 1.0, 1e-9);
    }
  }
}

TEST(SimulateProperty, ThresholdDecidesInitialSlope) {
  // s0 >= 0.8; dI/dt > 0 at t = 0 iff beta * s0 > gamma.
  for (double s0 : {0.8, 0.9, 0.95}) {
    const SIRState st{s0, 1.0 - s0, 0.0, 0.0};
    for (double gamma : {0.03, 0.1}) {
      const double above = 1.2 * gamma / s0, below = 0.8 * gamma / s0;
      EXPECT_GT(euler_step(st, SIRParams{above, gamma}, 0.01).i, st.i);
      EXPECT_LT(euler_step(st, SIRParams{below, gamma}, 0.01).i, st.i);
    }
  }
}

TEST(SimulateProperty, FirstOrderConvergence) {
  const auto ref = simulate(kMeanState, kSuccess, 0.1 / 64.0, 30.0);
  const double e1 = grid_distance(simulate(kMeanState, kSuccess, 0.1, 30.0), ref);
  const double e2 = grid_distance(simulate(kMeanState, kSuccess, 0.05, 30.0), ref);
  // Against a finite reference the exact ratio for a first-order method is
  // (1 - 1/64) / (1/2 - 1/64), close to 2.
  const double ratio = e1 / e2;
  EXPECT_GT(ratio, 2.0 / 1.5);
  EXPECT_LT(ratio, 2.0 * 1.5);
}

TEST(ValidateTrajectory, FlatTrajectoryHasZeroResidual) {
  const auto traj = simulate(SIRState{0.7, 0.0, 0.3, 0.0}, kSuccess, 0.1, 10.0);
  EXPECT_EQ(validate_trajectory(traj, kSuccess).max(), 0.0);
}

TEST(ValidateTrajectory, MeanStateResidualIsSmall) {
  const auto traj = simulate(kMeanState, kSuccess, 0.01, 30.0);
  EXPECT_LE(validate_trajectory(traj, kSuccess).recovered, 1e-3);
}

TEST(ValidateTrajectory, HalvingDtHalvesResidual) {
  const double r1 = validate_trajectory(simulate(kMeanState, kSuccess, 0.02, 30.0), kSuccess).recovered;
  const double r2 = validate_trajectory(simulate(kMeanState, kSuccess, 0.01, 30.0), kSuccess).recovered;
  const double ratio = r1 / r2;
  EXPECT_GT(ratio, 2.0 / 1.5);
  EXPECT_LT(ratio, 2.0 * 1.5);
}

TEST(ValidateTrajectory, NeedsThreeStates) {
  SIRTrajectory t;
  t.states = {kMeanState, kMeanState};
  EXPECT_ERROR_CODE(validate_trajectory(t, kSuccess), ErrorCode::kContractViolation);
}

TEST(Estimators, InitialConditionsFromCounts) {
  TimelineCounts c;
  c.first_week_commenters = 14;
  c.first_week_negative_reviewers = 4;
  c.total_reviewers = 100;
  c.total_comments = 120;
  const auto s = estimate_initial_conditions(c);
  EXPECT_NEAR(s.s, 0.82, 1e-12);
  EXPECT_NEAR(s.i, 0.14, 1e-12);
  EXPECT_NEAR(s.r, 0.04, 1e-12);
  EXPECT_EQ(s.t, 0.0);
}

TEST(Estimators, InitialConditionBoundaries) {
  TimelineCounts c;
  c.total_reviewers = 50;
  c.total_comments = 50;
  auto s = estimate_initial_conditions(c);
  EXPECT_EQ(s.s, 1.0);
  EXPECT_EQ(s.i, 0.0);
  c.first_week_commenters = 50;
  s = estimate_initial_conditions(c);
  EXPECT_EQ(s.s, 0.0);
  EXPECT_EQ(s.i, 1.0);
  EXPECT_EQ(s.r, 0.0);
}

TEST(Estimators, InconsistentCountsRejected) {
  TimelineCounts c;
  c.first_week_commenters = 80;
  c.first_week_negative_reviewers = 40;
  c.total_reviewers = 100;
  c.total_comments = 100;
  EXPECT_ERROR_CODE(estimate_initial_conditions(c), ErrorCode::kContractViolation);
}

TEST(Estimators, RatesFromCounts) {
  TimelineCounts c;
  c.first_week_comments = 50;
  c.first_week_negative_comments = 15;
  c.total_comments = 500;
  const auto est = estimate_rates(c);
  EXPECT_NEAR(est.params.beta, 0.10, 1e-12);
  EXPECT_NEAR(est.params.gamma, 0.03, 1e-12);
  EXPECT_FALSE(est.gamma_floored);
}

TEST(Estimators, GammaFloorAndBetaBoundary) {
  TimelineCounts c;
  c.first_week_comments = 20;
  c.total_comments = 20;
  const auto est = estimate_rates(c);
  EXPECT_EQ(est.params.beta, 1.0);
  EXPECT_EQ(est.params.gamma, kGammaFloor);
  EXPECT_TRUE(est.gamma_floored);
  EXPECT_ERROR_CODE(estimate_rates(TimelineCounts{}), ErrorCode::kContractViolation);
}

TEST(Estimators, TimelineCountsDistinctAuthorsAndRawComments) {
  ReviewTimeline tl({entry(0.0, false, "a"), entry(1.0, true, "a"), entry(2.0, true, "b"),
                     entry(8.0, false, "c"), entry(9.0, false, "a")});
  const auto c = count_timeline(tl);
  EXPECT_EQ(c.total_comments, 5u);
  EXPECT_EQ(c.total_reviewers, 3u);
  EXPECT_EQ(c.first_week_commenters, 2u);
  EXPECT_EQ(c.first_week_comments, 3u);
  EXPECT_EQ(c.first_week_negative_comments, 2u);
  EXPECT_EQ(c.first_week_negative_reviewers, 2u);
  EXPECT_ERROR_CODE(ReviewTimeline({entry(-1.0, false, "a")}), ErrorCode::kContractViolation);
  EXPECT_ERROR_CODE(ReviewTimeline({}), ErrorCode::kContractViolation);
}

TEST(Estimators, PureFunctionsOfCounts) {
  ReviewTimeline a({entry(0.0, false, "x"), entry(3.0, true, "y"), entry(10.0, false, "z")});
  ReviewTimeline b({entry(10.0, false, "z"), entry(3.0, true, "y"), entry(0.0, false, "x")});
  const auto sa = estimate_initial_conditions(a), sb = estimate_initial_conditions(b);
  EXPECT_EQ(sa.s, sb.s);
  EXPECT_EQ(sa.i, sb.i);
  EXPECT_EQ(estimate_rates(a).params.beta, estimate_rates(b).params.beta);
}

TEST(DerivedFeatures, RatiosFromMeanState) {
  const auto traj = simulate(kMeanState, kSuccess, 0.1, 10.0);
  const auto f = derived_features(kMeanState, kSuccess, traj);
  EXPECT_NEAR(f.basic_reproduction_number, 3.33, 0.005);
  EXPECT_NEAR(f.effective_contact_rate, 0.082, 1e-12);
  ASSERT_TRUE(f.i0_s0_ratio.has_value());
  EXPECT_NEAR(*f.i0_s0_ratio, 0.170732, 5e-7);
  EXPECT_NEAR(*f.r0_s0_ratio, 0.04 / 0.82, 1e-12);
}

TEST(DerivedFeatures, ZeroSusceptiblesLeaveRatiosUndefined) {
  const SIRState init{0.0, 1.0, 0.0, 0.0};
  const auto traj = simulate(init, kSuccess, 0.1, 1.0);
  const auto f = derived_features(init, kSuccess, traj);
  EXPECT_FALSE(f.i0_s0_ratio.has_value());
  EXPECT_FALSE(f.r0_s0_ratio.has_value());
  EXPECT_EQ(f.effective_contact_rate, 0.0);
  EXPECT_EQ(f.time_to_peak, 0.0);
}
