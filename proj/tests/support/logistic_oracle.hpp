#pragma once

// Ridge-penalized logistic regression fitted by Newton's method, used as a
// reference classifier on the same feature tables the network sees.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

class LogisticRegression {
 public:
  explicit LogisticRegression(double ridge = 1e-3) : ridge_(ridge) {}

  /// x is row-major with `width` columns; an intercept is added internally.
  void fit(const std::vector<double>& x, const std::vector<int>& y, std::size_t width, int iterations = 50) {
    const std::size_t n = y.size(), d = width + 1;
    w_.assign(d, 0.0);
    for (int it = 0; it < iterations; ++it) {
      std::vector<double> grad(d, 0.0);
      std::vector<std::vector<double>> hess(d, std::vector<double>(d, 0.0));
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.data() + i * width;
        const double p = sigmoid(dot(row, width));
        const double r = p - y[i];
        const double h = p * (1.0 - p);
        for (std::size_t a = 0; a < d; ++a) {
          const double xa = a < width ? row[a] : 1.0;
          grad[a] += r * xa;
          for (std::size_t b = 0; b < d; ++b) hess[a][b] += h * xa * (b < width ? row[b] : 1.0);
        }
      }
      for (std::size_t a = 0; a < width; ++a) {
        grad[a] += ridge_ * w_[a];
        hess[a][a] += ridge_;
      }
      hess[width][width] += 1e-9;
      const auto step = solve(hess, grad);
      double change = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        w_[a] -= step[a];
        change = std::max(change, std::abs(step[a]));
      }
      if (change < 1e-10) break;
    }
  }

  double probability(const double* row) const { return sigmoid(dot(row, w_.size() - 1)); }

  double accuracy(const std::vector<double>& x, const std::vector<int>& y, std::size_t width) const {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) correct += (probability(x.data() + i * width) >= 0.5) == (y[i] == 1);
    return static_cast<double>(correct) / static_cast<double>(y.size());
  }

 private:
  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  double dot(const double* row, std::size_t width) const {
    double z = w_[width];
    for (std::size_t a = 0; a < width; ++a) z += w_[a] * row[a];
    return z;
  }

  // Gaussian elimination with partial pivoting.
  static std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < n; ++r)
        if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
      if (std::abs(a[piv][c]) < 1e-300) throw std::runtime_error("singular Newton system");
      std::swap(a[c], a[piv]);
      std::swap(b[c], b[piv]);
      for (std::size_t r = c + 1; r < n; ++r) {
        const double f = a[r][c] / a[c][c];
        for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
        b[r] -= f * b[c];
      }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
      double s = b[r];
      for (std::size_t k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
      x[r] = s / a[r][r];
    }
    return x;
  }

  double ridge_;
  std::vector<double> w_;
};

}  // namespace oracle
