#pragma once

// Metrics, stratified splitting, and the train/evaluate harness used by the
// CLI, cross-validation and the ablation table. Undefined metrics stay empty
// optionals all the way to the report writers, which print them as NA.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mtlfilm/csv.hpp"
#include "mtlfilm/error.hpp"
#include "mtlfilm/mtl_net.hpp"
#include "mtlfilm/pipeline.hpp"
#include "mtlfilm/schema.hpp"

namespace mtlfilm::eval {

using features::canonical_schema;
using features::FeatureEntry;
using features::FeatureGroup;
using features::FeatureKind;
using features::FeatureSchema;
using features::GroupMask;

inline constexpr double kMapeFloor = 1e-8;
inline constexpr double kNormalQuantile975 = 1.959963984540054;

// ---------------------------------------------------------------------------
// Metrics

struct ClassificationMetrics {
  std::size_t n = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0.0;
  std::optional<double> precision, recall, f1, roc_auc;
};

struct RegressionMetrics {
  std::size_t n = 0;
  double mae = 0.0, mse = 0.0, rmse = 0.0;
  std::optional<double> r2, mape;
  std::size_t mape_skipped = 0;
};

struct EvalReport {
  ClassificationMetrics clf;
  RegressionMetrics reg;

  /// Flat (name, value) view in report column order.
  std::vector<std::pair<std::string, std::optional<double>>> values() const {
    return {{"accuracy", clf.accuracy}, {"precision", clf.precision}, {"recall", clf.recall}, {"f1", clf.f1},
            {"roc_auc", clf.roc_auc},   {"mae", reg.mae},             {"mse", reg.mse},       {"rmse", reg.rmse},
            {"r2", reg.r2},             {"mape", reg.mape}};
  }
};

inline void check_labels(std::span<const int> labels) {
  for (int y : labels) require(y == 0 || y == 1, "labels must be 0 or 1");
}

/// Mann-Whitney AUC with average ranks, so tied scores contribute 1/2.
/// Empty when either class is absent.
inline std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), "roc_auc: length mismatch");
  check_labels(labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j + 1;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

inline ClassificationMetrics classification_metrics(std::span<const double> probs, std::span<const int> labels,
                                                    double threshold = mtl::kDecisionThreshold) {
  require(probs.size() == labels.size() && !probs.empty(), "classification_metrics: need equal nonempty inputs");
  check_labels(labels);
  ClassificationMetrics m;
  m.n = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++m.tp;
    else if (pred) ++m.fp;
    else if (truth) ++m.fn;
    else ++m.tn;
  }
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(m.n);
  if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  m.roc_auc = roc_auc(probs, labels);
  return m;
}

inline RegressionMetrics regression_metrics(std::span<const double> preds, std::span<const double> targets) {
  require(preds.size() == targets.size() && preds.size() >= 2, "regression_metrics: need equal inputs of size >= 2");
  RegressionMetrics m;
  m.n = preds.size();
  const double n = static_cast<double>(m.n);
  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= n;
  double abs_sum = 0.0, sq_sum = 0.0, tot = 0.0, ape = 0.0;
  std::size_t ape_n = 0;
  for (std::size_t i = 0; i < m.n; ++i) {
    const double e = preds[i] - targets[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    tot += (targets[i] - mean) * (targets[i] - mean);
    if (std::abs(targets[i]) < kMapeFloor) {
      ++m.mape_skipped;
    } else {
      ape += std::abs(e / targets[i]);
      ++ape_n;
    }
  }
  m.mae = abs_sum / n;
  m.mse = sq_sum / n;
  m.rmse = std::sqrt(m.mse);
  if (tot > 0.0) m.r2 = 1.0 - sq_sum / tot;
  if (ape_n > 0) m.mape = ape / static_cast<double>(ape_n);
  return m;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<int> folds;  // per index, k-fold plans only
  int k = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_test(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < folds.size(); ++i) {
      if (folds[i] == fold) out.push_back(i);
    }
    return out;
  }
  std::vector<std::size_t> fold_train(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < folds.size(); ++i) {
      if (folds[i] != fold) out.push_back(i);
    }
    return out;
  }
};

namespace detail {

/// Indices of each class, each shuffled; class 0 first so the draw order is fixed.
inline std::array<std::vector<std::size_t>, 2> shuffled_classes(std::span<const int> labels, std::mt19937_64& rng) {
  check_labels(labels);
  std::array<std::vector<std::size_t>, 2> cls;
  for (std::size_t i = 0; i < labels.size(); ++i) cls[static_cast<std::size_t>(labels[i])].push_back(i);
  for (auto& c : cls) std::shuffle(c.begin(), c.end(), rng);
  return cls;
}

}  // namespace detail

inline SplitPlan stratified_split(std::span<const int> labels, double ratio, std::uint64_t seed) {
  require(!labels.empty(), "stratified_split: no labels", ErrorCode::kEmptyDataset);
  require(ratio > 0.0 && ratio < 1.0, "stratified_split: ratio must be in (0, 1)");
  std::mt19937_64 rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  for (const auto& c : detail::shuffled_classes(labels, rng)) {
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(c.size())));
    plan.train.insert(plan.train.end(), c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.test.insert(plan.test.end(), c.begin() + static_cast<std::ptrdiff_t>(n_train), c.end());
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

inline SplitPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  require(k >= 2, "stratified_kfold: k must be >= 2");
  require(!labels.empty(), "stratified_kfold: no labels", ErrorCode::kEmptyDataset);
  std::mt19937_64 rng(seed);
  SplitPlan plan;
  plan.seed = seed;
  plan.k = k;
  plan.folds.assign(labels.size(), -1);
  const auto cls = detail::shuffled_classes(labels, rng);
  for (std::size_t c = 0; c < cls.size(); ++c) {
    if (cls[c].size() < static_cast<std::size_t>(k)) {
      throw Error(ErrorCode::kInsufficientClassMembers, "class " + std::to_string(c) + " has " +
                                                            std::to_string(cls[c].size()) + " members, fewer than k = " +
                                                            std::to_string(k));
    }
  }
  std::size_t counter = 0;
  for (const auto& c : cls) {
    for (auto i : c) plan.folds[i] = static_cast<int>(counter++ % static_cast<std::size_t>(k));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Harness

inline constexpr double kValidationFraction = 0.15;

struct Predictions {
  std::vector<double> probs;
  std::vector<double> revenue;
};

inline Predictions predict_all(const mtl::Dataset& data, const mtl::NetworkParams& params,
                               const mtl::NetworkConfig& config) {
  Predictions p;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto pr = mtl::predict(data.row(i), params, config);
    p.probs.push_back(pr.success_probability);
    p.revenue.push_back(pr.revenue_scaled);
  }
  return p;
}

inline EvalReport evaluate(const mtl::Dataset& data, const mtl::NetworkParams& params,
                           const mtl::NetworkConfig& config) {
  const auto p = predict_all(data, params, config);
  return {classification_metrics(p.probs, data.labels), regression_metrics(p.revenue, data.targets)};
}

/// Splits a training table into fit and early-stopping parts, stratified on
/// the label.
inline std::pair<mtl::Dataset, mtl::Dataset> carve_validation(const mtl::Dataset& train, std::uint64_t seed,
                                                               double fraction = kValidationFraction) {
  const auto plan = stratified_split(train.labels, 1.0 - fraction, seed);
  return {train.subset(plan.train), train.subset(plan.test)};
}

struct RunResult {
  EvalReport report;
  mtl::TrainResult trained;
  pipeline::Preprocessor preprocessor;
  FeatureSchema schema;
  pipeline::FeatureTable test;
  Predictions predictions;
};

/// Fits preprocessing on `train_idx` only, trains with a stratified
/// validation carve-out, and evaluates on `test_idx`.
inline RunResult train_and_evaluate(std::span<const pipeline::RawRow> rows, std::span<const std::size_t> train_idx,
                                    std::span<const std::size_t> test_idx, const GroupMask& mask,
                                    const mtl::NetworkConfig& config) {
  RunResult out;
  out.preprocessor = pipeline::Preprocessor::fit(rows, train_idx);
  const auto train_table = pipeline::make_table(rows, train_idx, out.preprocessor, mask);
  out.schema = train_table.schema;
  out.test = pipeline::make_table(rows, test_idx, out.preprocessor, mask);
  const auto [fit, val] = carve_validation(train_table.data, config.seed);
  out.trained = mtl::train(fit, val, config);
  out.predictions = predict_all(out.test.data, out.trained.params, config);
  out.report = {classification_metrics(out.predictions.probs, out.test.data.labels),
                regression_metrics(out.predictions.revenue, out.test.data.targets)};
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct MetricSummary {
  std::string name;
  std::size_t defined = 0;  // folds where the metric exists
  std::optional<double> mean, std, ci_low, ci_high;
};

/// Mean, sample standard deviation and a normal-approximation 95% interval
/// over the folds where each metric is defined.
inline std::vector<MetricSummary> summarize(std::span<const EvalReport> folds) {
  require(!folds.empty(), "summarize: no folds", ErrorCode::kEmptyDataset);
  std::vector<MetricSummary> out;
  const auto names = folds.front().values();
  for (std::size_t m = 0; m < names.size(); ++m) {
    MetricSummary s;
    s.name = names[m].first;
    std::vector<double> v;
    for (const auto& f : folds) {
      if (const auto x = f.values()[m].second) v.push_back(*x);
    }
    s.defined = v.size();
    if (!v.empty()) {
      const double n = static_cast<double>(v.size());
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      const double half = kNormalQuantile975 * sd / std::sqrt(n);
      s.mean = mean;
      s.std = sd;
      s.ci_low = mean - half;
      s.ci_high = mean + half;
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct CrossValidationReport {
  std::vector<EvalReport> folds;
  std::vector<MetricSummary> summary;
};

/// Each fold trains with seed XOR fold index; results are kept in fold order.
inline CrossValidationReport cross_validate(std::span<const pipeline::RawRow> rows, int k, std::uint64_t seed,
                                            const GroupMask& mask, const mtl::NetworkConfig& config) {
  const auto labels = pipeline::stratification_labels(rows);
  const auto plan = stratified_kfold(labels, k, seed);
  CrossValidationReport rep;
  for (int f = 0; f < k; ++f) {
    auto cfg = config;
    cfg.seed = config.seed ^ static_cast<std::uint64_t>(f);
    rep.folds.push_back(train_and_evaluate(rows, plan.fold_train(f), plan.fold_test(f), mask, cfg).report);
  }
  rep.summary = summarize(rep.folds);
  return rep;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationSpec {
  std::string label;
  GroupMask removed;
  std::size_t expected_feature_count = 0;
};

inline const std::vector<AblationSpec>& standard_ablation_specs() {
  using G = FeatureGroup;
  static const std::vector<AblationSpec> specs = {
      {"Full Method", {}, 29},
      {"w/o SIR", {G::kSIR}, 22},
      {"w/o Sentiment", {G::kSentiment}, 24},
      {"w/o Events", {G::kEvents}, 28},
      {"w/o SIR & Sentiment", {G::kSIR, G::kSentiment}, 17},
      {"w/o SIR & Events", {G::kSIR, G::kEvents}, 21},
      {"w/o Sentiment & Events", {G::kSentiment, G::kEvents}, 23},
  };
  return specs;
}

struct AblationRow {
  AblationSpec spec;
  std::size_t feature_count = 0;
  EvalReport report;
};

/// One model per spec, all on the same split and seed.
inline std::vector<AblationRow> run_ablation(std::span<const pipeline::RawRow> rows, std::span<const AblationSpec> specs,
                                             const SplitPlan& plan, const mtl::NetworkConfig& config) {
  std::vector<AblationRow> out;
  for (const auto& spec : specs) {
    const auto width = canonical_schema().without(spec.removed).size();
    if (width != spec.expected_feature_count) {
      throw Error(ErrorCode::kContractViolation, spec.label + ": schema yields " + std::to_string(width) +
                                                     " features, expected " +
                                                     std::to_string(spec.expected_feature_count));
    }
    try {
      out.push_back({spec, width, train_and_evaluate(rows, plan.train, plan.test, spec.removed, config).report});
    } catch (const Error& e) {
      throw Error(e.code(), spec.label + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report writers

namespace detail {

inline std::string csv_value(std::optional<double> v) { return v ? csv::format_double(*v) : "NA"; }

inline std::string fixed(std::optional<double> v, int digits = 4) {
  if (!v) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << *v;
  return os.str();
}

inline std::string render_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c > 0) os << "  ";
      if (c == 0) os << std::left;
      else os << std::right;
      os << std::setw(static_cast<int>(width[c])) << cells[r][c];
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return os.str();
}

inline const std::vector<std::string>& metric_titles() {
  static const std::vector<std::string> t = {"Accuracy", "Precision", "Recall", "F1",   "ROC AUC",
                                             "MAE",      "MSE",       "RMSE",   "R2",   "MAPE"};
  return t;
}

}  // namespace detail

/// One labeled row per report.
inline std::string reports_csv(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::ostringstream os;
  std::vector<std::string> header = {"model", "n"};
  for (const auto& [name, _] : EvalReport{}.values()) header.push_back(name);
  csv::write_row(os, header);
  for (const auto& [label, rep] : rows) {
    std::vector<std::string> f = {label, std::to_string(rep.clf.n)};
    for (const auto& [_, v] : rep.values()) f.push_back(detail::csv_value(v));
    csv::write_row(os, f);
  }
  return os.str();
}

inline std::string reports_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"Model"};
  for (const auto& t : detail::metric_titles()) header.push_back(t);
  cells.push_back(header);
  for (const auto& [label, rep] : rows) {
    std::vector<std::string> r = {label};
    for (const auto& [_, v] : rep.values()) r.push_back(detail::fixed(v));
    cells.push_back(r);
  }
  return detail::render_table(cells);
}

inline std::string cv_csv(const CrossValidationReport& rep) {
  std::vector<std::pair<std::string, EvalReport>> rows;
  for (std::size_t f = 0; f < rep.folds.size(); ++f) rows.emplace_back("fold_" + std::to_string(f + 1), rep.folds[f]);
  std::ostringstream os;
  os << reports_csv(rows);
  const std::vector<std::pair<std::string, std::optional<double> MetricSummary::*>> stats = {
      {"mean", &MetricSummary::mean}, {"std", &MetricSummary::std},
      {"ci95_low", &MetricSummary::ci_low}, {"ci95_high", &MetricSummary::ci_high}};
  for (const auto& [label, field] : stats) {
    std::vector<std::string> f = {label, std::to_string(rep.folds.size())};
    for (const auto& s : rep.summary) f.push_back(detail::csv_value(s.*field));
    csv::write_row(os, f);
  }
  return os.str();
}

inline std::string cv_table(const CrossValidationReport& rep) {
  std::vector<std::vector<std::string>> cells = {{"Metric", "Mean", "Std", "95% CI low", "95% CI high", "Folds"}};
  for (std::size_t m = 0; m < rep.summary.size(); ++m) {
    const auto& s = rep.summary[m];
    cells.push_back({detail::metric_titles()[m], detail::fixed(s.mean), detail::fixed(s.std), detail::fixed(s.ci_low),
                     detail::fixed(s.ci_high), std::to_string(s.defined)});
  }
  return detail::render_table(cells);
}

inline std::string ablation_csv(std::span<const AblationRow> rows) {
  std::ostringstream os;
  csv::write_row(os, {"removed_components", "num_features", "accuracy", "f1", "mae", "rmse"});
  for (const auto& r : rows) {
    csv::write_row(os, {r.spec.label, std::to_string(r.feature_count), detail::csv_value(r.report.clf.accuracy),
                        detail::csv_value(r.report.clf.f1), detail::csv_value(r.report.reg.mae),
                        detail::csv_value(r.report.reg.rmse)});
  }
  return os.str();
}

inline std::string ablation_table(std::span<const AblationRow> rows) {
  std::vector<std::vector<std::string>> cells = {{"Removed Components", "Num Features", "Accuracy", "F1", "MAE", "RMSE"}};
  for (const auto& r : rows) {
    cells.push_back({r.spec.label, std::to_string(r.feature_count), detail::fixed(r.report.clf.accuracy),
                     detail::fixed(r.report.clf.f1), detail::fixed(r.report.reg.mae), detail::fixed(r.report.reg.rmse)});
  }
  return detail::render_table(cells);
}

}  // namespace mtlfilm::eval
