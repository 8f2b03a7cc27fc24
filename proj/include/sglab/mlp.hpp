#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sglab/rng.hpp"

namespace sglab {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline const std::vector<int>& default_layer_dims() {
  static const std::vector<int> dims{3, 64, 128, 64, 64, 2};
  return dims;
}

// Per-column affine rescaling applied to raw inputs before the first layer:
// x_norm = (x - offset) * scale. Empty vectors mean identity. A constant
// input column gets scale 0 (mapped to 0), which is harmless since it carries
// no information.
template <typename Scalar>
struct InputTransform {
  DenseVector<Scalar> offset;
  DenseVector<Scalar> scale;

  bool identity() const { return offset.size() == 0; }
};

// Fully connected ReLU network. weights[l] is (dims[l] x dims[l+1]), applied
// as row-vector times matrix; the final layer has no activation.
template <typename Scalar = double>
struct MlpParams {
  std::vector<int> layer_dims;
  std::vector<DenseMatrix<Scalar>> weights;
  std::vector<DenseVector<Scalar>> biases;
  std::uint64_t seed = 0;
  InputTransform<Scalar> input_transform;

  std::size_t layer_count() const { return weights.size(); }
};

template <typename Scalar>
struct Gradients {
  std::vector<DenseMatrix<Scalar>> weights;
  std::vector<DenseVector<Scalar>> biases;
};

template <typename Scalar = double>
struct AdamState {
  std::vector<DenseMatrix<Scalar>> m_weights, v_weights;
  std::vector<DenseVector<Scalar>> m_biases, v_biases;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

template <typename Scalar = double>
struct Batch {
  DenseMatrix<Scalar> inputs;   // N x in_dim
  DenseMatrix<Scalar> targets;  // N x out_dim
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases. Draws are
// made in double and cast, so a given seed describes one canonical network.
template <typename Scalar = double>
MlpParams<Scalar> init_params(std::uint64_t seed,
                              const std::vector<int>& dims = default_layer_dims()) {
  if (dims.size() < 2) throw std::invalid_argument("layer_dims: need at least 2 layers");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("layer_dims: widths must be positive");
  MlpParams<Scalar> p;
  p.layer_dims = dims;
  p.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    DenseMatrix<Scalar> w(fan_in, fan_out);
    for (int i = 0; i < fan_in; ++i)
      for (int j = 0; j < fan_out; ++j)
        w(i, j) = static_cast<Scalar>(rng.uniform(-limit, limit));
    p.weights.push_back(std::move(w));
    p.biases.push_back(DenseVector<Scalar>::Zero(fan_out));
  }
  return p;
}

template <typename Scalar>
AdamState<Scalar> init_adam(const MlpParams<Scalar>& p) {
  AdamState<Scalar> s;
  for (const auto& w : p.weights) {
    s.m_weights.push_back(DenseMatrix<Scalar>::Zero(w.rows(), w.cols()));
    s.v_weights.push_back(DenseMatrix<Scalar>::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : p.biases) {
    s.m_biases.push_back(DenseVector<Scalar>::Zero(b.size()));
    s.v_biases.push_back(DenseVector<Scalar>::Zero(b.size()));
  }
  return s;
}

namespace detail {

template <typename Scalar>
DenseMatrix<Scalar> apply_transform(const InputTransform<Scalar>& t,
                                    const DenseMatrix<Scalar>& x) {
  if (t.identity()) return x;
  if (x.cols() != t.offset.size())
    throw std::invalid_argument("input_transform: column count mismatch");
  DenseMatrix<Scalar> out = x;
  out.rowwise() -= t.offset.transpose();
  out = out.array().rowwise() * t.scale.transpose().array();
  return out;
}

}  // namespace detail

template <typename Scalar>
DenseMatrix<Scalar> forward_batch(const MlpParams<Scalar>& p, const DenseMatrix<Scalar>& inputs) {
  if (inputs.cols() != p.layer_dims.front())
    throw std::invalid_argument("forward: input width does not match the first layer");
  DenseMatrix<Scalar> a = detail::apply_transform(p.input_transform, inputs);
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    DenseMatrix<Scalar> z = a * p.weights[l];
    z.rowwise() += p.biases[l].transpose();
    a = (l + 1 < p.layer_count()) ? z.cwiseMax(Scalar(0)) : std::move(z);
  }
  return a;
}

template <typename Scalar>
DenseVector<Scalar> forward(const MlpParams<Scalar>& p, const DenseVector<Scalar>& input) {
  DenseMatrix<Scalar> row = input.transpose();
  DenseMatrix<Scalar> out = forward_batch(p, row);
  return out.row(0).transpose();
}

namespace detail {

template <typename Scalar>
void require_batch(const Batch<Scalar>& b, const MlpParams<Scalar>& p) {
  if (b.inputs.rows() == 0) throw std::invalid_argument("batch: must be non-empty");
  if (b.inputs.rows() != b.targets.rows())
    throw std::invalid_argument("batch: input/target row counts differ");
  if (b.inputs.cols() != p.layer_dims.front())
    throw std::invalid_argument("batch: input width does not match the first layer");
  if (b.targets.cols() != p.layer_dims.back())
    throw std::invalid_argument("batch: target width does not match the last layer");
}

}  // namespace detail

// Sum over output components of the per-component mean squared error. With
// both components normalized by the same row count this equals
// ||residual||_F^2 / N; accumulation happens in double regardless of Scalar.
template <typename Scalar>
double loss(const MlpParams<Scalar>& p, const Batch<Scalar>& b) {
  detail::require_batch(b, p);
  DenseMatrix<Scalar> pred = forward_batch(p, b.inputs);
  DenseMatrix<double> r = (pred - b.targets).template cast<double>();
  return r.squaredNorm() / static_cast<double>(b.inputs.rows());
}

// Reverse-mode gradient of loss(). ReLU'(0) := 0 (strict positivity mask).
template <typename Scalar>
Gradients<Scalar> grad(const MlpParams<Scalar>& p, const Batch<Scalar>& b) {
  detail::require_batch(b, p);
  const std::size_t layers = p.layer_count();
  const auto n = b.inputs.rows();

  std::vector<DenseMatrix<Scalar>> acts(layers + 1);
  std::vector<DenseMatrix<Scalar>> pre(layers);
  acts[0] = detail::apply_transform(p.input_transform, b.inputs);
  for (std::size_t l = 0; l < layers; ++l) {
    pre[l] = acts[l] * p.weights[l];
    pre[l].rowwise() += p.biases[l].transpose();
    acts[l + 1] = (l + 1 < layers) ? pre[l].cwiseMax(Scalar(0)) : pre[l];
  }

  Gradients<Scalar> g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  DenseMatrix<Scalar> delta =
      (acts[layers] - b.targets) * (Scalar(2) / static_cast<Scalar>(n));
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l] = acts[l].transpose() * delta;
    g.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = delta * p.weights[l].transpose();
      delta = delta.cwiseProduct(
          (pre[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
  }
  return g;
}

// One bias-corrected Adam update, in place.
template <typename Scalar>
void adam_step(MlpParams<Scalar>& p, const Gradients<Scalar>& g, AdamState<Scalar>& s) {
  if (g.weights.size() != p.weights.size() || g.biases.size() != p.biases.size() ||
      s.m_weights.size() != p.weights.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  s.step_count += 1;
  const Scalar b1 = static_cast<Scalar>(s.beta1);
  const Scalar b2 = static_cast<Scalar>(s.beta2);
  const Scalar lr = static_cast<Scalar>(s.lr);
  const Scalar eps = static_cast<Scalar>(s.eps_hat);
  const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(s.beta1, s.step_count));
  const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(s.beta2, s.step_count));
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (g.weights[l].rows() != p.weights[l].rows() ||
        g.weights[l].cols() != p.weights[l].cols() ||
        g.biases[l].size() != p.biases[l].size())
      throw std::invalid_argument("adam_step: shape mismatch at layer " + std::to_string(l));
    auto& mw = s.m_weights[l];
    auto& vw = s.v_weights[l];
    mw = b1 * mw + (Scalar(1) - b1) * g.weights[l];
    vw = (b2 * vw.array() + (Scalar(1) - b2) * g.weights[l].array().square()).matrix();
    p.weights[l].array() -=
        lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
    auto& mb = s.m_biases[l];
    auto& vb = s.v_biases[l];
    mb = b1 * mb + (Scalar(1) - b1) * g.biases[l];
    vb = (b2 * vb.array() + (Scalar(1) - b2) * g.biases[l].array().square()).matrix();
    p.biases[l].array() -=
        lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
  }
}

enum class StopReason { Threshold, Plateau, MaxEpochs };

class TrainingDivergedError : public std::runtime_error {
 public:
  explicit TrainingDivergedError(std::vector<double> history)
      : std::runtime_error("training diverged: loss became non-finite at epoch " +
                           std::to_string(history.size())),
        history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

struct TrainConfig {
  long max_epochs = 100000;
  double loss_threshold = 1e-3;
  long plateau_window = 2000;
  double plateau_rel_improvement = 1e-6;
  std::uint64_t seed = 0;
  bool normalize_inputs = true;
  std::vector<int> layer_dims = default_layer_dims();
  double lr = 1e-3;
};

template <typename Scalar = double>
struct TrainResult {
  MlpParams<Scalar> params;
  std::vector<double> loss_history;  // loss before each step; last entry is final
  StopReason stop = StopReason::MaxEpochs;
  long epochs = 0;  // Adam steps taken
  bool envelope_ok = true;
};

// True when the rolling minimum over `window`-wide stretches of the history
// never increases - the "monotone envelope" healthy-descent signature.
inline bool monotone_envelope_ok(const std::vector<double>& history, std::size_t window = 500) {
  if (history.size() <= window) return true;
  std::deque<std::size_t> q;  // indices, values increasing
  double prev_min = 0.0;
  bool have_prev = false;
  bool ok = true;
  for (std::size_t i = 0; i < history.size(); ++i) {
    while (!q.empty() && history[q.back()] >= history[i]) q.pop_back();
    q.push_back(i);
    if (i + 1 >= window) {
      while (q.front() + window <= i) q.pop_front();
      const double m = history[q.front()];
      if (have_prev && m > prev_min * (1.0 + 1e-12)) ok = false;
      prev_min = m;
      have_prev = true;
    }
  }
  return ok;
}

template <typename Scalar>
InputTransform<Scalar> fit_input_transform(const DenseMatrix<Scalar>& inputs) {
  InputTransform<Scalar> t;
  const auto cols = inputs.cols();
  t.offset.resize(cols);
  t.scale.resize(cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const Scalar lo = inputs.col(c).minCoeff();
    const Scalar hi = inputs.col(c).maxCoeff();
    t.offset[c] = (hi + lo) / Scalar(2);
    t.scale[c] = hi > lo ? Scalar(2) / (hi - lo) : Scalar(0);
  }
  return t;
}

// Full-batch Adam training loop. Stops when the loss drops below the
// threshold, when relative improvement over plateau_window epochs falls under
// plateau_rel_improvement, or at max_epochs. Deterministic per (seed, data,
// Scalar).
template <typename Scalar = double>
TrainResult<Scalar> train(const Batch<Scalar>& b, const TrainConfig& cfg) {
  if (cfg.max_epochs < 1) throw std::invalid_argument("training.max_epochs: must be >= 1");
  if (cfg.plateau_window < 1) throw std::invalid_argument("training.plateau_window: must be >= 1");

  TrainResult<Scalar> r;
  r.params = init_params<Scalar>(cfg.seed, cfg.layer_dims);
  if (cfg.normalize_inputs) r.params.input_transform = fit_input_transform(b.inputs);
  detail::require_batch(b, r.params);
  AdamState<Scalar> s = init_adam(r.params);
  s.lr = cfg.lr;
  r.loss_history.reserve(static_cast<std::size_t>(cfg.max_epochs) + 1);

  for (long e = 0;; ++e) {
    const double current = loss(r.params, b);
    if (!std::isfinite(current)) throw TrainingDivergedError(std::move(r.loss_history));
    r.loss_history.push_back(current);
    if (current < cfg.loss_threshold) {
      r.stop = StopReason::Threshold;
      break;
    }
    const std::size_t w = static_cast<std::size_t>(cfg.plateau_window);
    if (r.loss_history.size() > w) {
      const double before = r.loss_history[r.loss_history.size() - 1 - w];
      if (before > 0.0 && (before - current) / before < cfg.plateau_rel_improvement) {
        r.stop = StopReason::Plateau;
        break;
      }
    }
    if (e >= cfg.max_epochs) {
      r.stop = StopReason::MaxEpochs;
      break;
    }
    Gradients<Scalar> g = grad(r.params, b);
    adam_step(r.params, g, s);
    r.epochs += 1;
  }
  r.envelope_ok = monotone_envelope_ok(r.loss_history);
  return r;
}

}  // namespace sglab
