// Acceptance checks. Prints one PASS/FAIL line per criterion with the
// measured quantities and exits nonzero if any criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mtlfilm/checkpoint.hpp"
#include "mtlfilm/eval.hpp"
#include "mtlfilm/features.hpp"
#include "mtlfilm/pipeline.hpp"
#include "mtlfilm/sentiment.hpp"
#include "mtlfilm/sir_dynamics.hpp"
#include "mtlfilm/synthetic.hpp"
#include "support/jacobi_oracle.hpp"
#include "support/mtl_checks.hpp"
#include "support/pipeline_oracle.hpp"
#include "support/yj_samples.hpp"

using namespace mtlfilm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------

void sir_conservation(Outcome& o) {
  const sir::SIRState init{0.82, 0.14, 0.04, 0.0};
  const sir::SIRParams p{0.10, 0.03};
  sir::SIRState cur = init;
  double worst = 0.0;
  bool s_monotone = true, r_monotone = true;
  for (int k = 0; k < 10000; ++k) {
    const auto next = sir::euler_step(cur, p, 0.01);
    worst = std::max(worst, std::abs(next.s + next.i + next.r - 1.0));
    s_monotone = s_monotone && next.s <= cur.s;
    r_monotone = r_monotone && next.r >= cur.r;
    cur = next;
  }
  o.detail << "max |s+i+r-1| = " << fmt(worst, 3);
  o.expect(worst <= 1e-9, "conservation");
  o.expect(s_monotone, "s nonincreasing");
  o.expect(r_monotone, "r nondecreasing");
}

void r0_arithmetic(Outcome& o) {
  const sir::SIRState init{0.82, 0.14, 0.04, 0.0};
  auto r0 = [&](double beta, double gamma) {
    const sir::SIRParams p{beta, gamma};
    return sir::derived_features(init, p, sir::simulate(init, p, 0.1, 1.0)).basic_reproduction_number;
  };
  const double hi = r0(0.10, 0.03), lo = r0(0.0252, 0.03);
  o.detail << "R0 = " << fmt(hi, 12) << " and " << fmt(lo, 12);
  o.expect(std::abs(hi - 10.0 / 3.0) <= 1e-9, "0.10/0.03");
  o.expect(std::abs(lo - 0.84) <= 1e-9, "0.0252/0.03");
  o.expect(std::round(hi * 100) / 100 == 3.33 && std::round(lo * 100) / 100 == 0.84, "2 dp rounding");
}

void euler_order(Outcome& o) {
  const sir::SIRState init{0.82, 0.14, 0.04, 0.0};
  const sir::SIRParams p{0.10, 0.03};
  const double horizon = 30.0;
  const double ref_dt = 0.02 / 64.0;
  const auto ref = sir::simulate(init, p, ref_dt, horizon);
  auto error = [&](double dt) {
    const auto traj = sir::simulate(init, p, dt, horizon);
    const auto stride = static_cast<std::size_t>(std::llround(dt / ref_dt));
    double d = 0.0;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      const auto& a = traj.states[k];
      const auto& b = ref.states[k * stride];
      d = std::max({d, std::abs(a.s - b.s), std::abs(a.i - b.i), std::abs(a.r - b.r)});
    }
    return d;
  };
  const double e08 = error(0.08), e04 = error(0.04), e02 = error(0.02);
  const double r1 = e08 / e04, r2 = e04 / e02;
  const double residual = sir::validate_trajectory(sir::simulate(init, p, 0.01, horizon), p).recovered;
  o.detail << "error ratios " << fmt(r1, 4) << ", " << fmt(r2, 4) << "; residual " << fmt(residual, 3);
  o.expect(r1 >= 1.7 && r1 <= 2.3 && r2 >= 1.7 && r2 <= 2.3, "halving ratio in [1.7, 2.3]");
  o.expect(residual <= 1e-3, "integral residual");
}

void yeo_johnson(Outcome& o) {
  double round_trip = 0.0;
  for (double lambda : {-2.0, 0.0, 0.5, 1.0, 2.0, 3.0})
    for (int k = 0; k <= 2000; ++k) {
      const double x = -10.0 + 0.01 * k;
      round_trip = std::max(round_trip, std::abs(features::yeo_johnson_inverse(features::yeo_johnson(x, lambda), lambda) - x));
    }
  double identity = 0.0;
  for (int k = 0; k <= 2000; ++k) identity = std::max(identity, std::abs(features::yeo_johnson(0.01 * k, 1.0) - 0.01 * k));
  double worst_mle = 0.0;
  std::uint64_t seed = 100;
  for (double planted : {-1.0, -0.5, 0.0, 0.5, 1.5, 2.5}) {
    const auto v = oracle::planted_yeo_johnson_sample(planted, 1000, seed++);
    worst_mle = std::max(worst_mle, std::abs(features::fit_yeo_johnson(v).lambda_yj - planted));
  }
  o.detail << "round trip " << fmt(round_trip, 3) << ", identity " << fmt(identity, 3) << ", worst |lambda error| "
           << fmt(worst_mle, 3);
  o.expect(round_trip <= 1e-9, "round trip");
  o.expect(identity <= 1e-12, "identity at lambda = 1");
  o.expect(worst_mle <= 0.3, "MLE recovery");
}

void pca(Outcome& o) {
  double worst = 0.0;
  bool ratios_ok = true;
  for (auto [n, d, seed] : {std::tuple{5, 5, 1u}, std::tuple{50, 4, 2u}}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd m(n, d);
    oracle::Matrix rows(n, std::vector<double>(d));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) rows[i][j] = m(i, j) = nd(rng) * (1.0 + j) + (j ? 0.4 * m(i, 0) : 0.0);
    // Centering leaves rank n - 1, so a 5 x 5 sample supports 4 axes; all d
    // eigenvalues are still compared.
    const int k = std::min(d, n - 1);
    const auto model = features::pca_fit(m, k);
    const auto ref = oracle::jacobi_eigen(oracle::standardized_covariance(rows));
    for (int j = 0; j < d; ++j) worst = std::max(worst, std::abs(model.eigenvalues(j) - ref.values[j]));
    for (int j = 0; j < k; ++j) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += model.components(j, c) * ref.vectors[j][c];
      const double sign = dot >= 0.0 ? 1.0 : -1.0;
      for (int c = 0; c < d; ++c) worst = std::max(worst, std::abs(model.components(j, c) - sign * ref.vectors[j][c]));
      if (j > 0) ratios_ok = ratios_ok && model.explained_variance_ratio(j) <= model.explained_variance_ratio(j - 1);
    }
    ratios_ok = ratios_ok && model.explained_variance_ratio.sum() <= 1.0 + 1e-12;
  }
  o.detail << "max deviation from Jacobi oracle " << fmt(worst, 3);
  o.expect(worst <= 1e-8, "Jacobi agreement");
  o.expect(ratios_ok, "explained variance ratios");
}

void gradient_check(Outcome& o) {
  const mtl::NetworkConfig cfg;
  std::mt19937_64 rng(21);
  auto params = mtl::NetworkParams::initialize(29, cfg, rng);
  params.log_var_clf() = 0.25;
  params.log_var_reg() = -0.35;
  const auto data = checks::random_batch(29, 8, 22);
  auto timed = [&](mtl::Mode mode, double& secs) {
    const auto start = std::chrono::steady_clock::now();
    const auto r = checks::gradient_check(params, data, cfg, mode);
    secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  };
  double eval_secs = 0.0, train_secs = 0.0;
  const auto eval_mode = timed(mtl::Mode::kEval, eval_secs);
  const auto train_mode = timed(mtl::Mode::kTrain, train_secs);
  o.detail << params.size() << " parameters; max relative error " << fmt(eval_mode.max_relative_error, 3)
           << " (eval), " << fmt(train_mode.max_relative_error, 3) << " (dropout); " << eval_mode.checked
           << " checked per mode in " << fmt(eval_secs, 2) << "s / " << fmt(train_secs, 2) << "s";
  o.expect(eval_mode.max_relative_error <= 1e-4, "eval-mode gradient");
  o.expect(train_mode.max_relative_error <= 1e-4, "dropout gradient");
  o.expect(eval_mode.checked == params.size() && train_mode.checked == params.size(), "coverage");
}

void uncertainty_fixed_point(Outcome& o) {
  const mtl::NetworkConfig cfg;
  std::mt19937_64 rng(23);
  const auto params = mtl::NetworkParams::initialize(29, cfg, rng);
  const auto r = checks::uncertainty_fixed_point(params, checks::random_batch(29, 64, 24), cfg, 2000, cfg.learning_rate);
  o.detail << "u_c = " << fmt(r.u_clf) << " vs ln L_c = " << fmt(r.target_clf) << "; u_r = " << fmt(r.u_reg)
           << " vs ln L_r = " << fmt(r.target_reg) << " after " << r.steps << " steps";
  o.expect(std::abs(r.u_clf - r.target_clf) <= 0.05, "classification log-variance");
  o.expect(std::abs(r.u_reg - r.target_reg) <= 0.05, "regression log-variance");
}

// Full pipeline run with the offline stub extractor and default network.
struct PipelineRun {
  std::vector<pipeline::RawRow> rows;
  eval::SplitPlan plan;
  eval::RunResult result;
};

PipelineRun planted_pipeline(int n, std::uint64_t seed, const fs::path& out_dir) {
  const auto corpus = synth::generate_synthetic(n, 1.0, seed);
  sentiment::StubExtractor stub;
  const auto scores = pipeline::score_map(pipeline::score_reviews(corpus.movies, corpus.reviews, stub, {}));
  PipelineRun run;
  run.rows = pipeline::labelable(pipeline::build_raw_rows(corpus.movies, corpus.reviews, scores));
  run.plan = eval::stratified_split(pipeline::stratification_labels(run.rows), 0.8, seed);
  mtl::NetworkConfig cfg;
  cfg.seed = seed;
  run.result = eval::train_and_evaluate(run.rows, run.plan.train, run.plan.test, {}, cfg);
  fs::create_directories(out_dir);
  mtl::save_checkpoint(run.result.trained.params, cfg, (out_dir / "checkpoint.json").string());
  std::ofstream(out_dir / "eval_report.csv", std::ios::binary) << eval::reports_csv({{"MTL (test)", run.result.report}});
  std::ofstream(out_dir / "train_report.csv", std::ios::binary) << run.result.trained.report.to_csv();
  return run;
}

void aggregation(Outcome& o) {
  const std::vector<sentiment::ScoredReview> rs{{8.0, 0.0, 5, 8}, {3.0, 10.0, 8, 8}};  // weights 0.6, 0.9
  const double got = sentiment::aggregate_temporal(rs, 10.0, {0.05, 1.0}).s_t;
  const double oracle = 0.6 * 8.0 * std::exp(-0.05 * 10.0) + 0.9 * 3.0 * std::exp(0.0);
  const std::vector<sentiment::ScoredReview> flat{{4.0, 1.0, 1, 2}, {8.0, 6.0, 3, 6}};
  const double no_decay = sentiment::aggregate_temporal(flat, 30.0, {0.0, 1.0}).s_t;
  o.detail << "S_t = " << fmt(got, 15) << " (oracle " << fmt(oracle, 15) << "); lambda = 0 gives " << fmt(no_decay, 15);
  o.expect(std::abs(got - oracle) <= 1e-12, "two-term oracle");
  o.expect(std::abs(got - 5.611) < 5e-4, "5.611 at 3 dp");
  o.expect(std::abs(no_decay - 6.0) <= 1e-12, "plain weighted sum");
}

void metric_oracles(Outcome& o) {
  std::mt19937_64 rng(31);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 8) / 8.0;  // coarse scores force ties
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    double num = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1.0;
          num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    if (eval::roc_auc(s, y).value_or(-1.0) != num / pairs) ++mismatches;
  }
  const auto m = eval::classification_metrics(std::vector<double>{0.9, 0.8, 0.7, 0.2, 0.1}, std::vector<int>{1, 1, 0, 1, 0});
  o.detail << "AUC mismatches " << mismatches << "/100; fixture P/R/F1 = " << fmt(*m.precision) << "/"
           << fmt(*m.recall) << "/" << fmt(*m.f1);
  o.expect(mismatches == 0, "AUC equals brute force");
  o.expect(m.tp == 2 && m.fp == 1 && m.fn == 1 && m.tn == 1, "confusion counts");
  o.expect(*m.precision == 2.0 / 3.0 && *m.recall == 2.0 / 3.0 && *m.f1 == 2.0 / 3.0, "2/3 fixture");
}

}  // namespace

int main() {
  const auto work = fs::temp_directory_path() / ("mtlfilm_acceptance_" + std::to_string(::getpid()));
  int failures = 0;
  auto run = [&](int id, const std::string& name, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      body(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %2d  %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.str().c_str(),
                secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };

  run(1, "sir-conservation", sir_conservation);
  run(2, "r0-arithmetic", r0_arithmetic);
  run(3, "euler-order", euler_order);
  run(4, "yeo-johnson", yeo_johnson);
  run(5, "pca-vs-jacobi", pca);
  run(6, "gradient-check", gradient_check);
  run(7, "uncertainty-fixed-point", uncertainty_fixed_point);

  std::optional<PipelineRun> first;
  run(8, "planted-signal-end-to-end", [&](Outcome& o) {
    first = planted_pipeline(1000, 7, work / "run1");
    const auto& rep = first->result.report;
    const double oracle_acc = oracle::logistic_test_accuracy(first->rows, 7);
    o.detail << "accuracy " << fmt(rep.clf.accuracy, 4) << ", R2 " << fmt(rep.reg.r2.value_or(NAN), 4)
             << ", logistic oracle " << fmt(oracle_acc, 4) << " on " << first->plan.test.size() << " test films";
    o.expect(rep.clf.accuracy >= 0.90, "accuracy >= 0.90");
    o.expect(rep.reg.r2.value_or(-1.0) >= 0.80, "R2 >= 0.80");
    o.expect(oracle_acc >= 0.85, "oracle >= 0.85");
  });

  run(9, "ablation-harness", [&](Outcome& o) {
    if (!first) throw std::runtime_error("criterion 8 produced no data");
    mtl::NetworkConfig cfg;
    const auto rows = eval::run_ablation(first->rows, eval::standard_ablation_specs(), first->plan, cfg);
    std::vector<std::size_t> counts;
    for (const auto& r : rows) counts.push_back(r.feature_count);
    const double full = rows[0].report.clf.accuracy, no_sentiment = rows[2].report.clf.accuracy;
    o.detail << "counts [";
    for (std::size_t k = 0; k < counts.size(); ++k) o.detail << (k ? ", " : "") << counts[k];
    o.detail << "]; Full " << fmt(full, 4) << " vs w/o Sentiment " << fmt(no_sentiment, 4);
    o.expect(counts == std::vector<std::size_t>{29, 22, 24, 28, 17, 21, 23}, "feature counts");
    o.expect(full - no_sentiment >= 0.05, "accuracy gap >= 0.05");
  });

  run(10, "metric-oracles", metric_oracles);

  run(11, "determinism", [&](Outcome& o) {
    if (!first) throw std::runtime_error("criterion 8 produced no data");
    planted_pipeline(1000, 7, work / "run2");
    bool same = true;
    for (const char* f : {"checkpoint.json", "eval_report.csv", "train_report.csv"}) {
      const bool eq = read_bytes(work / "run1" / f) == read_bytes(work / "run2" / f);
      o.detail << f << (eq ? " identical; " : " DIFFERS; ");
      same = same && eq;
    }
    o.expect(same, "bit-identical outputs");
  });

  run(12, "temporal-aggregation", aggregation);

  std::error_code ec;
  fs::remove_all(work, ec);
  std::printf("%s: %d of 12 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
