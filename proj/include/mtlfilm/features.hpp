#pragma once

// Column transforms used by the preprocessing pipeline: quantile
// winsorization, the Yeo-Johnson power transform and its likelihood fit,
// standardized PCA, plus the label and event-indicator rules.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mtlfilm/error.hpp"

namespace mtlfilm::features {

/// Quantile with linear interpolation between order statistics
/// (h = (n - 1) p). `sorted` must be ascending.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  require(!sorted.empty(), "quantile of an empty column");
  require(p >= 0.0 && p <= 1.0, "quantile level must be in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> column, double p) {
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, p);
}

struct WinsorBounds {
  double low = -std::numeric_limits<double>::infinity();
  double high = std::numeric_limits<double>::infinity();

  double apply(double x) const { return std::clamp(x, low, high); }
};

inline WinsorBounds fit_winsor_bounds(std::span<const double> column, double p_low = 0.01,
                                      double p_high = 0.99) {
  require(!column.empty(), "winsorize requires a nonempty column");
  require(p_low <= p_high, "winsorize requires p_low <= p_high");
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  return {quantile_sorted(sorted, p_low), quantile_sorted(sorted, p_high)};
}

inline std::vector<double> winsorize(std::span<const double> column, double p_low = 0.01,
                                     double p_high = 0.99) {
  const auto bounds = fit_winsor_bounds(column, p_low, p_high);
  std::vector<double> out(column.begin(), column.end());
  for (auto& v : out) v = bounds.apply(v);
  return out;
}

// ---------------------------------------------------------------------------
// Yeo-Johnson

inline constexpr double kLambdaEps = 1e-12;

inline double yeo_johnson(double x, double lambda) {
  if (x >= 0.0) {
    if (std::abs(lambda) < kLambdaEps) return std::log1p(x);
    return std::expm1(lambda * std::log1p(x)) / lambda;
  }
  const double two_minus = 2.0 - lambda;
  if (std::abs(two_minus) < kLambdaEps) return -std::log1p(-x);
  return -std::expm1(two_minus * std::log1p(-x)) / two_minus;
}

inline double yeo_johnson_inverse(double y, double lambda) {
  if (y >= 0.0) {
    if (std::abs(lambda) < kLambdaEps) return std::expm1(y);
    return std::expm1(std::log1p(lambda * y) / lambda);
  }
  const double two_minus = 2.0 - lambda;
  if (std::abs(two_minus) < kLambdaEps) return -std::expm1(-y);
  return -std::expm1(std::log1p(-two_minus * y) / two_minus);
}

/// Profile log-likelihood of lambda under a Gaussian model of the
/// transformed data, including the Jacobian term.
inline double yeo_johnson_log_likelihood(std::span<const double> column, double lambda) {
  const double n = static_cast<double>(column.size());
  double mean = 0.0;
  std::vector<double> y(column.size());
  for (std::size_t k = 0; k < column.size(); ++k) {
    y[k] = yeo_johnson(column[k], lambda);
    mean += y[k];
  }
  mean /= n;
  double var = 0.0, jacobian = 0.0;
  for (std::size_t k = 0; k < column.size(); ++k) {
    var += (y[k] - mean) * (y[k] - mean);
    jacobian += std::copysign(std::log1p(std::abs(column[k])), column[k]);
  }
  var /= n;
  if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(var) + (lambda - 1.0) * jacobian;
}

struct TransformParams {
  double lambda_yj = 1.0;
  std::string fitted_on;
};

inline bool is_constant(std::span<const double> column) {
  const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
  return *lo == *hi;
}

/// Maximum-likelihood lambda by golden-section search on [-5, 5].
inline TransformParams fit_yeo_johnson(std::span<const double> column, std::string name = {},
                                       double lo = -5.0, double hi = 5.0, double tol = 1e-5) {
  require(column.size() >= 10, "fit_yeo_johnson requires at least 10 values");
  if (is_constant(column)) {
    throw Error(ErrorCode::kDegenerateColumn, "constant column " + name);
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = yeo_johnson_log_likelihood(column, c);
  double fd = yeo_johnson_log_likelihood(column, d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = yeo_johnson_log_likelihood(column, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = yeo_johnson_log_likelihood(column, d);
    }
  }
  return {0.5 * (a + b), std::move(name)};
}

// ---------------------------------------------------------------------------
// PCA

struct PCAModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;                     // per-column standard deviation
  Eigen::MatrixXd components;                // k x d, rows orthonormal
  Eigen::VectorXd explained_variance_ratio;  // k, nonincreasing
  Eigen::VectorXd eigenvalues;               // all d, descending

  Eigen::Index k() const { return components.rows(); }
};

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns, matching `values`
};

inline EigenPairs symmetric_eigen(const Eigen::MatrixXd& sym) {
  require(sym.rows() == sym.cols(), "symmetric_eigen requires a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  require(solver.info() == Eigen::Success, "eigendecomposition failed");
  const Eigen::Index d = sym.rows();
  EigenPairs out{Eigen::VectorXd(d), Eigen::MatrixXd(d, d)};
  for (Eigen::Index j = 0; j < d; ++j) {
    out.values(j) = solver.eigenvalues()(d - 1 - j);
    out.vectors.col(j) = solver.eigenvectors().col(d - 1 - j);
  }
  return out;
}

/// Fits k principal axes of the column-standardized data (rows are samples).
/// Each axis is signed so that its largest-magnitude loading is positive.
inline PCAModel pca_fit(const Eigen::MatrixXd& data, Eigen::Index k) {
  const Eigen::Index n = data.rows(), d = data.cols();
  require(n >= 2 && d >= k && k >= 1, "pca_fit requires n >= 2 and d >= k >= 1");
  PCAModel model;
  model.mean = data.colwise().mean().transpose();
  Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  model.scale = (centered.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(model.scale(j) > 0.0)) model.scale(j) = 1.0;
  }
  Eigen::MatrixXd z = centered.array().rowwise() / model.scale.transpose().array();
  Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n - 1);
  auto eig = symmetric_eigen(cov);

  const double top = std::max(eig.values(0), 0.0);
  const double tol = std::max(1.0, top) * 1e-12 * static_cast<double>(d);
  Eigen::Index positive = 0;
  for (Eigen::Index j = 0; j < d; ++j) positive += eig.values(j) > tol ? 1 : 0;
  if (positive < k) {
    throw Error(ErrorCode::kRankDeficient, "covariance has " + std::to_string(positive) +
                                               " positive eigenvalues, need " + std::to_string(k));
  }
  double total = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) total += std::max(eig.values(j), 0.0);

  model.eigenvalues = eig.values.cwiseMax(0.0);
  model.components.resize(k, d);
  model.explained_variance_ratio.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd v = eig.vectors.col(j).normalized();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.components.row(j) = v.transpose();
    model.explained_variance_ratio(j) = model.eigenvalues(j) / total;
  }
  return model;
}

inline Eigen::VectorXd pca_project(const PCAModel& model, const Eigen::VectorXd& row) {
  require(row.size() == model.mean.size(), "pca_project: row width mismatch", ErrorCode::kShapeMismatch);
  Eigen::VectorXd z = ((row - model.mean).array() / model.scale.array()).matrix();
  return model.components * z;
}

/// Maps component scores back to the original space (exact when k = d).
inline Eigen::VectorXd pca_reconstruct(const PCAModel& model, const Eigen::VectorXd& scores) {
  Eigen::VectorXd z = model.components.transpose() * scores;
  return (z.array() * model.scale.array()).matrix() + model.mean;
}

// ---------------------------------------------------------------------------
// Labels and events

inline constexpr double kSuccessRoi = 0.5;

inline double compute_roi(double opening_weekend, double budget) {
  if (!(budget > 0.0) || !std::isfinite(budget)) {
    throw Error(ErrorCode::kMissingBudget, "budget must be positive after imputation");
  }
  return opening_weekend / budget;
}

inline int compute_label(double opening_weekend, double budget) {
  return compute_roi(opening_weekend, budget) >= kSuccessRoi ? 1 : 0;
}

inline constexpr int kFirstEventYear = 2004;
inline constexpr int kLastEventYear = 2024;

/// +1 for years with industry-wide positive shocks, -1 for negative ones.
/// Years outside the covered range map to 0 with a warning on stderr.
inline double event_indicator(int release_year) {
  if (release_year < kFirstEventYear || release_year > kLastEventYear) {
    std::fprintf(stderr, "warning: release year %d outside event table [%d, %d]\n", release_year,
                 kFirstEventYear, kLastEventYear);
    return 0.0;
  }
  switch (release_year) {
    case 2005:  // digital cinema transition
    case 2010:  // international co-production treaties
    case 2014:  // streaming original-content investment
    case 2018:  // Chinese screen expansion
    case 2019:  // private equity inflow
      return 1.0;
    case 2008:  // financial crisis
    case 2011:  // European debt crisis
    case 2017:  // streaming content-cost inflation
    case 2020:  // pandemic
    case 2023:  // labor strikes
      return -1.0;
    default:
      return 0.0;
  }
}

}  // namespace mtlfilm::features
