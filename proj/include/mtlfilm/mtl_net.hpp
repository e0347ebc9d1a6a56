#pragma once

// Multi-task feedforward network: a shared SELU trunk feeding a
// classification tower (sigmoid head) and a regression tower (linear head),
// trained on an uncertainty-weighted composite loss with L1/L2 weight
// penalties. Gradients are hand-derived reverse mode; training uses Adam with
// early stopping on the validation objective.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtlfilm/error.hpp"

namespace mtlfilm::mtl {

inline constexpr double kSeluAlpha = 1.6732632423543772;
inline constexpr double kSeluScale = 1.0507009873554805;
inline constexpr double kProbabilityEps = 1e-7;
inline constexpr double kDecisionThreshold = 0.5;

inline double selu(double x) { return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x); }

inline double selu_derivative(double x) {
  return x > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct NetworkConfig {
  std::vector<std::size_t> shared_sizes{128, 64};
  std::vector<std::size_t> clf_sizes{32, 16};
  std::vector<std::size_t> reg_sizes{64, 32, 16};
  double dropout_shared = 0.5;
  double dropout_clf = 0.4;
  double dropout_reg = 0.35;
  double l1 = 1e-4;
  double l2 = 1e-3;
  double alpha_clf = 1.0;
  double alpha_reg = 1.5;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 150;
  std::size_t patience = 40;
  std::uint64_t seed = 7;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    auto positive = [](const std::vector<std::size_t>& v) {
      return !v.empty() && std::all_of(v.begin(), v.end(), [](std::size_t s) { return s > 0; });
    };
    require(positive(shared_sizes) && positive(clf_sizes) && positive(reg_sizes),
            "layer sizes must be nonempty and positive");
    for (double p : {dropout_shared, dropout_clf, dropout_reg}) {
      require(p >= 0.0 && p < 1.0, "dropout rates must be in [0, 1)");
    }
    require(learning_rate > 0.0, "learning_rate must be > 0");
    require(batch_size > 0 && max_epochs > 0, "batch_size and max_epochs must be > 0");
    require(patience <= max_epochs, "patience must not exceed max_epochs");
    require(l1 >= 0.0 && l2 >= 0.0, "regularization weights must be >= 0");
  }

  nlohmann::json to_json() const {
    return {{"shared_sizes", shared_sizes}, {"clf_sizes", clf_sizes},    {"reg_sizes", reg_sizes},
            {"dropout_shared", dropout_shared}, {"dropout_clf", dropout_clf}, {"dropout_reg", dropout_reg},
            {"l1", l1},                      {"l2", l2},                  {"alpha_clf", alpha_clf},
            {"alpha_reg", alpha_reg},        {"learning_rate", learning_rate}, {"batch_size", batch_size},
            {"max_epochs", max_epochs},      {"patience", patience},      {"seed", seed},
            {"adam_beta1", adam_beta1},      {"adam_beta2", adam_beta2},  {"adam_epsilon", adam_epsilon}};
  }

  /// Missing keys keep their defaults, so partial override files work.
  static NetworkConfig from_json(const nlohmann::json& j) {
    NetworkConfig c;
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    read("shared_sizes", c.shared_sizes);
    read("clf_sizes", c.clf_sizes);
    read("reg_sizes", c.reg_sizes);
    read("dropout_shared", c.dropout_shared);
    read("dropout_clf", c.dropout_clf);
    read("dropout_reg", c.dropout_reg);
    read("l1", c.l1);
    read("l2", c.l2);
    read("alpha_clf", c.alpha_clf);
    read("alpha_reg", c.alpha_reg);
    read("learning_rate", c.learning_rate);
    read("batch_size", c.batch_size);
    read("max_epochs", c.max_epochs);
    read("patience", c.patience);
    read("seed", c.seed);
    read("adam_beta1", c.adam_beta1);
    read("adam_beta2", c.adam_beta2);
    read("adam_epsilon", c.adam_epsilon);
    c.validate();
    return c;
  }
};

/// Offsets of one dense layer inside the flat parameter vector. Weights are
/// stored row-major as out x in.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

/// All trainable state in one flat vector plus the layout describing it.
/// Gradients use the same type.
class NetworkParams {
 public:
  NetworkParams() = default;

  NetworkParams(std::size_t input_width, const NetworkConfig& config) : input_width_(input_width) {
    require(input_width > 0, "input width must be > 0", ErrorCode::kShapeMismatch);
    config.validate();
    std::size_t offset = 0;
    auto add = [&](std::size_t in, std::size_t out) {
      DenseLayer l{in, out, offset, offset + in * out};
      offset += in * out + out;
      return l;
    };
    std::size_t width = input_width;
    for (auto s : config.shared_sizes) {
      shared_.push_back(add(width, s));
      width = s;
    }
    const std::size_t trunk_out = width;
    for (auto s : config.clf_sizes) {
      clf_.push_back(add(width, s));
      width = s;
    }
    clf_head_ = add(width, 1);
    width = trunk_out;
    for (auto s : config.reg_sizes) {
      reg_.push_back(add(width, s));
      width = s;
    }
    reg_head_ = add(width, 1);
    log_var_clf_ = offset++;
    log_var_reg_ = offset++;
    values_.assign(offset, 0.0);
  }

  /// Weights ~ Normal(0, 1/fan_in), biases and log-variances zero.
  static NetworkParams initialize(std::size_t input_width, const NetworkConfig& config,
                                  std::mt19937_64& rng) {
    NetworkParams p(input_width, config);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto* layer : p.all_layers()) {
      const double sd = 1.0 / std::sqrt(static_cast<double>(layer->in));
      for (auto& w : p.weights(*layer)) w = sd * normal(rng);
    }
    return p;
  }

  NetworkParams zeros_like() const {
    NetworkParams g = *this;
    std::fill(g.values_.begin(), g.values_.end(), 0.0);
    return g;
  }

  std::size_t input_width() const { return input_width_; }
  const std::vector<DenseLayer>& shared() const { return shared_; }
  const std::vector<DenseLayer>& clf() const { return clf_; }
  const std::vector<DenseLayer>& reg() const { return reg_; }
  const DenseLayer& clf_head() const { return clf_head_; }
  const DenseLayer& reg_head() const { return reg_head_; }

  std::vector<const DenseLayer*> all_layers() const {
    std::vector<const DenseLayer*> out;
    for (const auto& l : shared_) out.push_back(&l);
    for (const auto& l : clf_) out.push_back(&l);
    out.push_back(&clf_head_);
    for (const auto& l : reg_) out.push_back(&l);
    out.push_back(&reg_head_);
    return out;
  }

  std::span<double> weights(const DenseLayer& l) { return {values_.data() + l.weight_offset, l.in * l.out}; }
  std::span<const double> weights(const DenseLayer& l) const {
    return {values_.data() + l.weight_offset, l.in * l.out};
  }
  std::span<double> biases(const DenseLayer& l) { return {values_.data() + l.bias_offset, l.out}; }
  std::span<const double> biases(const DenseLayer& l) const { return {values_.data() + l.bias_offset, l.out}; }

  double& log_var_clf() { return values_[log_var_clf_]; }
  double log_var_clf() const { return values_[log_var_clf_]; }
  double& log_var_reg() { return values_[log_var_reg_]; }
  double log_var_reg() const { return values_[log_var_reg_]; }
  std::size_t log_var_clf_index() const { return log_var_clf_; }
  std::size_t log_var_reg_index() const { return log_var_reg_; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  /// True at positions holding weight-matrix entries (the regularized set).
  std::vector<bool> weight_mask() const {
    std::vector<bool> mask(values_.size(), false);
    for (const auto* l : all_layers()) {
      std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(l->weight_offset), l->in * l->out, true);
    }
    return mask;
  }

  bool same_layout(const NetworkParams& o) const {
    auto eq = [](const DenseLayer& a, const DenseLayer& b) {
      return a.in == b.in && a.out == b.out && a.weight_offset == b.weight_offset;
    };
    auto eqv = [&](const std::vector<DenseLayer>& a, const std::vector<DenseLayer>& b) {
      return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), eq);
    };
    return input_width_ == o.input_width_ && eqv(shared_, o.shared_) && eqv(clf_, o.clf_) &&
           eqv(reg_, o.reg_) && eq(clf_head_, o.clf_head_) && eq(reg_head_, o.reg_head_) &&
           values_.size() == o.values_.size();
  }

 private:
  std::size_t input_width_ = 0;
  std::vector<DenseLayer> shared_, clf_, reg_;
  DenseLayer clf_head_, reg_head_;
  std::size_t log_var_clf_ = 0, log_var_reg_ = 0;
  std::vector<double> values_;
};

/// Trainable parameter count of the multi-task network.
inline std::size_t count_parameters(std::size_t input_width, const NetworkConfig& config) {
  return NetworkParams(input_width, config).size();
}

/// Counts for two standalone single-task networks, each with its own copy of
/// the trunk: {classification, regression}.
inline std::pair<std::size_t, std::size_t> count_single_task_parameters(std::size_t input_width,
                                                                        const NetworkConfig& config) {
  auto dense = [](const std::vector<std::size_t>& sizes, std::size_t in) {
    std::size_t total = 0;
    for (auto s : sizes) {
      total += in * s + s;
      in = s;
    }
    return std::pair{total, in};
  };
  const auto [trunk, trunk_out] = dense(config.shared_sizes, input_width);
  const auto [clf, clf_out] = dense(config.clf_sizes, trunk_out);
  const auto [reg, reg_out] = dense(config.reg_sizes, trunk_out);
  return {trunk + clf + clf_out + 1 + 1, trunk + reg + reg_out + 1 + 1};
}

enum class Mode { kTrain, kEval };

// ---------------------------------------------------------------------------
// Forward

/// One hidden layer's activations for one sample. `scale` holds the inverted
/// dropout multiplier (0 or 1/(1-p)); it is all ones in eval mode.
struct LayerCache {
  std::vector<double> pre;
  std::vector<double> scale;
  std::vector<double> out;
};

struct SampleCache {
  std::vector<double> input;
  std::vector<LayerCache> shared, clf, reg;
  double clf_logit = 0.0;
  double p_clf = 0.5;
  double y_reg = 0.0;
};

/// Inverted dropout: zero each unit with probability `rate`, scale survivors
/// by 1/(1-rate). Returns the multiplier applied to each unit.
inline std::vector<double> dropout_scales(std::size_t n, double rate, Mode mode, std::mt19937_64* rng) {
  std::vector<double> scale(n, 1.0);
  if (mode == Mode::kEval || rate <= 0.0) return scale;
  require(rng != nullptr, "train-mode dropout needs a random stream");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep = 1.0 / (1.0 - rate);
  for (auto& s : scale) s = unit(*rng) < rate ? 0.0 : keep;
  return scale;
}

namespace detail {

inline void affine(const NetworkParams& p, const DenseLayer& l, std::span<const double> in,
                   std::vector<double>& out) {
  out.assign(l.out, 0.0);
  const auto w = p.weights(l);
  const auto b = p.biases(l);
  for (std::size_t o = 0; o < l.out; ++o) {
    const double* row = w.data() + o * l.in;
    double acc = b[o];
    for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

inline std::span<const double> run_tower(const NetworkParams& p, const std::vector<DenseLayer>& layers,
                                         std::span<const double> in, double rate, Mode mode,
                                         std::mt19937_64* rng, std::vector<LayerCache>& caches) {
  caches.resize(layers.size());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& c = caches[k];
    affine(p, layers[k], in, c.pre);
    c.scale = dropout_scales(layers[k].out, rate, mode, rng);
    c.out.resize(c.pre.size());
    for (std::size_t u = 0; u < c.pre.size(); ++u) c.out[u] = selu(c.pre[u]) * c.scale[u];
    in = c.out;
  }
  return in;
}

inline double head(const NetworkParams& p, const DenseLayer& l, std::span<const double> in) {
  std::vector<double> out;
  affine(p, l, in, out);
  return out[0];
}

}  // namespace detail

inline SampleCache forward(std::span<const double> x, const NetworkParams& params,
                           const NetworkConfig& config, Mode mode, std::mt19937_64* rng = nullptr) {
  if (x.size() != params.input_width()) {
    throw Error(ErrorCode::kShapeMismatch, "input width " + std::to_string(x.size()) + " != network width " +
                                               std::to_string(params.input_width()));
  }
  SampleCache c;
  c.input.assign(x.begin(), x.end());
  const auto trunk = detail::run_tower(params, params.shared(), c.input, config.dropout_shared, mode, rng, c.shared);
  const auto clf = detail::run_tower(params, params.clf(), trunk, config.dropout_clf, mode, rng, c.clf);
  c.clf_logit = detail::head(params, params.clf_head(), clf);
  c.p_clf = sigmoid(c.clf_logit);
  const auto reg = detail::run_tower(params, params.reg(), trunk, config.dropout_reg, mode, rng, c.reg);
  c.y_reg = detail::head(params, params.reg_head(), reg);
  return c;
}

// ---------------------------------------------------------------------------
// Loss

/// Borrowed view of a mini-batch: rows are contiguous in `x`.
struct Batch {
  std::span<const double> x;
  std::span<const int> labels;
  std::span<const double> targets;
  std::size_t width = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return x.subspan(i * width, width); }
};

struct LossComponents {
  double bce = 0.0;
  double mse = 0.0;
  double task_clf = 0.0;  // exp(-u_c) * bce + u_c
  double task_reg = 0.0;  // exp(-u_r) * mse + u_r
  double l1_penalty = 0.0;
  double l2_penalty = 0.0;
  double total = 0.0;
};

inline const double kLogitClip = std::log((1.0 - kProbabilityEps) / kProbabilityEps);

/// Binary cross-entropy from a logit, with the probability clipped to
/// [eps, 1 - eps]; evaluated in log-sum-exp form.
inline double bce_from_logit(double logit, int label) {
  const double z = std::clamp(logit, -kLogitClip, kLogitClip);
  return std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
}

struct ForwardPass {
  std::vector<SampleCache> samples;
};

inline void check_batch(const Batch& batch, const NetworkParams& params) {
  if (batch.size() == 0) throw Error(ErrorCode::kEmptyDataset, "empty batch");
  if (batch.width != params.input_width() || batch.x.size() != batch.size() * batch.width ||
      batch.targets.size() != batch.size()) {
    throw Error(ErrorCode::kShapeMismatch, "batch shape does not match the network");
  }
}

inline ForwardPass forward_batch(const Batch& batch, const NetworkParams& params, const NetworkConfig& config,
                                 Mode mode, std::mt19937_64* rng = nullptr) {
  check_batch(batch, params);
  ForwardPass pass;
  pass.samples.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) pass.samples.push_back(forward(batch.row(i), params, config, mode, rng));
  return pass;
}

inline LossComponents loss(const ForwardPass& pass, const Batch& batch, const NetworkParams& params,
                           const NetworkConfig& config) {
  check_batch(batch, params);
  require(pass.samples.size() == batch.size(), "forward pass does not match batch", ErrorCode::kShapeMismatch);
  LossComponents c;
  const double n = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    require(batch.labels[i] == 0 || batch.labels[i] == 1, "labels must be 0 or 1");
    c.bce += bce_from_logit(pass.samples[i].clf_logit, batch.labels[i]);
    const double err = pass.samples[i].y_reg - batch.targets[i];
    c.mse += err * err;
  }
  c.bce /= n;
  c.mse /= n;
  const double uc = params.log_var_clf(), ur = params.log_var_reg();
  c.task_clf = std::exp(-uc) * c.bce + uc;
  c.task_reg = std::exp(-ur) * c.mse + ur;
  for (const auto* l : params.all_layers()) {
    for (double w : params.weights(*l)) {
      c.l1_penalty += std::abs(w);
      c.l2_penalty += w * w;
    }
  }
  c.total = config.alpha_clf * c.task_clf + config.alpha_reg * c.task_reg + config.l1 * c.l1_penalty +
            config.l2 * c.l2_penalty;
  return c;
}

inline LossComponents loss(const Batch& batch, const NetworkParams& params, const NetworkConfig& config) {
  return loss(forward_batch(batch, params, config, Mode::kEval), batch, params, config);
}

// ---------------------------------------------------------------------------
// Backward

namespace detail {

/// Accumulates gradients of one tower given d(loss)/d(tower output); returns
/// d(loss)/d(tower input).
inline std::vector<double> backprop_tower(const NetworkParams& p, NetworkParams& grad,
                                          const std::vector<DenseLayer>& layers,
                                          const std::vector<LayerCache>& caches,
                                          std::span<const double> tower_input, std::vector<double> d_out) {
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    const auto& c = caches[k];
    const std::span<const double> in = k == 0 ? tower_input : std::span<const double>(caches[k - 1].out);
    std::vector<double> d_pre(l.out);
    for (std::size_t o = 0; o < l.out; ++o) d_pre[o] = d_out[o] * c.scale[o] * selu_derivative(c.pre[o]);
    auto gw = grad.weights(l);
    auto gb = grad.biases(l);
    const auto w = p.weights(l);
    std::vector<double> d_in(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      if (d_pre[o] == 0.0) continue;
      gb[o] += d_pre[o];
      double* grow = gw.data() + o * l.in;
      const double* wrow = w.data() + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) {
        grow[i] += d_pre[o] * in[i];
        d_in[i] += d_pre[o] * wrow[i];
      }
    }
    d_out = std::move(d_in);
  }
  return d_out;
}

inline std::vector<double> backprop_head(const NetworkParams& p, NetworkParams& grad, const DenseLayer& l,
                                         std::span<const double> in, double d_logit) {
  auto gw = grad.weights(l);
  grad.biases(l)[0] += d_logit;
  const auto w = p.weights(l);
  std::vector<double> d_in(l.in);
  for (std::size_t i = 0; i < l.in; ++i) {
    gw[i] += d_logit * in[i];
    d_in[i] = d_logit * w[i];
  }
  return d_in;
}

}  // namespace detail

/// Exact gradient of `loss(...).total` with respect to every parameter,
/// including both log-variances. The L1 subgradient at 0 is taken as 0.
inline NetworkParams backward(const ForwardPass& pass, const Batch& batch, const NetworkParams& params,
                              const NetworkConfig& config) {
  check_batch(batch, params);
  require(pass.samples.size() == batch.size(), "forward pass does not match batch", ErrorCode::kShapeMismatch);
  NetworkParams grad = params.zeros_like();
  const double n = static_cast<double>(batch.size());
  const double uc = params.log_var_clf(), ur = params.log_var_reg();
  const double clf_scale = config.alpha_clf * std::exp(-uc) / n;
  const double reg_scale = config.alpha_reg * std::exp(-ur) / n;

  double bce = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = pass.samples[i];
    const int y = batch.labels[i];
    bce += bce_from_logit(s.clf_logit, y);
    const double err = s.y_reg - batch.targets[i];
    mse += err * err;

    const bool clipped = std::abs(s.clf_logit) > kLogitClip;
    const double d_logit = clipped ? 0.0 : clf_scale * (sigmoid(s.clf_logit) - y);
    const double d_yreg = reg_scale * 2.0 * err;

    const std::span<const double> trunk_out = s.shared.back().out;
    const std::span<const double> clf_top = s.clf.empty() ? trunk_out : std::span<const double>(s.clf.back().out);
    const std::span<const double> reg_top = s.reg.empty() ? trunk_out : std::span<const double>(s.reg.back().out);

    auto d_clf = detail::backprop_head(params, grad, params.clf_head(), clf_top, d_logit);
    auto d_trunk = detail::backprop_tower(params, grad, params.clf(), s.clf, trunk_out, std::move(d_clf));
    auto d_reg = detail::backprop_head(params, grad, params.reg_head(), reg_top, d_yreg);
    const auto d_trunk_reg = detail::backprop_tower(params, grad, params.reg(), s.reg, trunk_out, std::move(d_reg));
    for (std::size_t k = 0; k < d_trunk.size(); ++k) d_trunk[k] += d_trunk_reg[k];
    detail::backprop_tower(params, grad, params.shared(), s.shared, s.input, std::move(d_trunk));
  }
  bce /= n;
  mse /= n;
  grad.log_var_clf() = config.alpha_clf * (1.0 - std::exp(-uc) * bce);
  grad.log_var_reg() = config.alpha_reg * (1.0 - std::exp(-ur) * mse);

  for (const auto* l : params.all_layers()) {
    const auto w = params.weights(*l);
    auto g = grad.weights(*l);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double sign = w[k] > 0.0 ? 1.0 : (w[k] < 0.0 ? -1.0 : 0.0);
      g[k] += config.l1 * sign + 2.0 * config.l2 * w[k];
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Optimizer

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    require(params.size() == m_.size() && grad.size() == m_.size(), "Adam size mismatch",
            ErrorCode::kShapeMismatch);
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
      v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
      params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Training

/// Row-major design matrix with both task targets.
struct Dataset {
  std::size_t width = 0;
  std::vector<double> x;
  std::vector<int> labels;
  std::vector<double> targets;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * width, width}; }

  void push_back(std::span<const double> features, int label, double target) {
    require(features.size() == width, "row width mismatch", ErrorCode::kShapeMismatch);
    x.insert(x.end(), features.begin(), features.end());
    labels.push_back(label);
    targets.push_back(target);
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.width = width;
    for (auto i : indices) out.push_back(row(i), labels[i], targets[i]);
    return out;
  }

  Batch batch() const { return Batch{x, labels, targets, width}; }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_clf = 0.0, train_reg = 0.0;
  double val_clf = 0.0, val_reg = 0.0;
  double val_total = 0.0;
  double u_clf = 0.0, u_reg = 0.0;
};

enum class StopReason { kMaxEpochs, kEarlyStopping };

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  StopReason stop_reason = StopReason::kMaxEpochs;
  double final_u_clf = 0.0, final_u_reg = 0.0;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "epoch,train_clf,train_reg,val_clf,val_reg,u_c,u_r\n";
    for (const auto& e : epochs) {
      os << e.epoch << ',' << e.train_clf << ',' << e.train_reg << ',' << e.val_clf << ',' << e.val_reg << ','
         << e.u_clf << ',' << e.u_reg << '\n';
    }
    return os.str();
  }
};

struct TrainResult {
  NetworkParams params;
  TrainReport report;
};

inline void check_finite(const LossComponents& c, std::size_t epoch, std::size_t batch_index) {
  if (!std::isfinite(c.total)) {
    std::ostringstream os;
    os << "non-finite loss at epoch " << epoch << " batch " << batch_index << " (bce=" << c.bce << ", mse=" << c.mse
       << ", task_clf=" << c.task_clf << ", task_reg=" << c.task_reg << ")";
    throw Error(ErrorCode::kNonFiniteLoss, os.str());
  }
}

/// Mini-batch Adam with early stopping on the validation objective; returns
/// the parameters of the best validation epoch. Deterministic in config.seed.
inline TrainResult train(const Dataset& train_set, const Dataset& val_set, const NetworkConfig& config) {
  config.validate();
  if (train_set.size() == 0 || val_set.size() == 0) throw Error(ErrorCode::kEmptyDataset, "empty train/val set");
  require(train_set.width == val_set.width, "train/val width mismatch", ErrorCode::kShapeMismatch);

  std::mt19937_64 rng(config.seed);
  NetworkParams params = NetworkParams::initialize(train_set.width, config, rng);
  Adam adam(params.size(), config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon);

  TrainResult result;
  result.params = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const Batch val_batch = val_set.batch();

  std::vector<double> xb;
  std::vector<int> yb;
  std::vector<double> tb;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double clf_sum = 0.0, reg_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      xb.clear();
      yb.clear();
      tb.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto r = train_set.row(order[k]);
        xb.insert(xb.end(), r.begin(), r.end());
        yb.push_back(train_set.labels[order[k]]);
        tb.push_back(train_set.targets[order[k]]);
      }
      const Batch batch{xb, yb, tb, train_set.width};
      const auto pass = forward_batch(batch, params, config, Mode::kTrain, &rng);
      const auto comp = loss(pass, batch, params, config);
      check_finite(comp, epoch, batches);
      const auto grad = backward(pass, batch, params, config);
      adam.step(params.values(), grad.values());
      clf_sum += comp.bce;
      reg_sum += comp.mse;
      ++batches;
    }
    rec.train_clf = clf_sum / static_cast<double>(batches);
    rec.train_reg = reg_sum / static_cast<double>(batches);
    const auto val = loss(val_batch, params, config);
    check_finite(val, epoch, batches);
    rec.val_clf = val.bce;
    rec.val_reg = val.mse;
    rec.val_total = val.total;
    rec.u_clf = params.log_var_clf();
    rec.u_reg = params.log_var_reg();
    result.report.epochs.push_back(rec);

    if (val.total < best_val) {
      best_val = val.total;
      result.params = params;
      result.report.best_epoch = epoch;
    } else if (epoch - result.report.best_epoch >= config.patience) {
      result.report.stop_reason = StopReason::kEarlyStopping;
      break;
    }
  }
  result.report.final_u_clf = result.params.log_var_clf();
  result.report.final_u_reg = result.params.log_var_reg();
  return result;
}

struct Prediction {
  double success_probability = 0.5;
  int decision = 1;
  double revenue_scaled = 0.0;
};

inline Prediction predict(std::span<const double> x, const NetworkParams& params, const NetworkConfig& config) {
  const auto c = forward(x, params, config, Mode::kEval);
  return {c.p_clf, c.p_clf >= kDecisionThreshold ? 1 : 0, c.y_reg};
}

}  // namespace mtlfilm::mtl
