#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sglab/mlp.hpp"
#include "sglab/rng.hpp"

using Catch::Approx;
using namespace sglab;

namespace {

Batch<double> random_batch(std::uint64_t seed, int n, int in_dim, int out_dim) {
  Rng rng(seed);
  Batch<double> b;
  b.inputs.resize(n, in_dim);
  b.targets.resize(n, out_dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < in_dim; ++j) b.inputs(i, j) = rng.uniform(-2.0, 2.0);
    for (int j = 0; j < out_dim; ++j) b.targets(i, j) = rng.uniform(-1.0, 1.0);
  }
  return b;
}

// Minimal single-parameter-vector Adam written with plain scalars, used as an
// independent reference for adam_step.
struct ScalarAdam {
  double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double mw = 0.0, vw = 0.0, mb = 0.0, vb = 0.0;
  long k = 0;
  void step(double& w, double& b, double gw, double gb) {
    k += 1;
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw * gw;
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb * gb;
    const double c1 = 1 - std::pow(b1, k), c2 = 1 - std::pow(b2, k);
    w -= lr * (mw / c1) / (std::sqrt(vw / c2) + eps);
    b -= lr * (mb / c1) / (std::sqrt(vb / c2) + eps);
  }
};

}  // namespace

TEST_CASE("init_params shapes, bounds, determinism", "[mlp]") {
  MlpParams<double> p = init_params<double>(7);
  REQUIRE(p.layer_dims == std::vector<int>{3, 64, 128, 64, 64, 2});
  REQUIRE(p.layer_count() == 5);
  for (std::size_t l = 0; l < 5; ++l) {
    CHECK(p.weights[l].rows() == p.layer_dims[l]);
    CHECK(p.weights[l].cols() == p.layer_dims[l + 1]);
    CHECK(p.biases[l].size() == p.layer_dims[l + 1]);
    CHECK(p.biases[l].cwiseAbs().maxCoeff() == 0.0);
    const double limit = std::sqrt(6.0 / (p.layer_dims[l] + p.layer_dims[l + 1]));
    CHECK(p.weights[l].cwiseAbs().maxCoeff() <= limit);
    CHECK(p.weights[l].cwiseAbs().maxCoeff() > 0.0);
  }
  MlpParams<double> q = init_params<double>(7);
  for (std::size_t l = 0; l < 5; ++l) CHECK(p.weights[l] == q.weights[l]);
  MlpParams<double> r = init_params<double>(8);
  CHECK(p.weights[0] != r.weights[0]);

  CHECK_THROWS_AS(init_params<double>(0, {4}), std::invalid_argument);
  CHECK_THROWS_AS(init_params<double>(0, {4, 0, 2}), std::invalid_argument);
}

TEST_CASE("forward on hand-built networks", "[mlp]") {
  // Zero weights: output is the last bias regardless of input.
  MlpParams<double> p = init_params<double>(1, {3, 4, 2});
  for (auto& w : p.weights) w.setZero();
  p.biases[1] << 1.0, 2.0;
  DenseVector<double> x(3);
  x << 0.3, -0.7, 5.0;
  DenseVector<double> y = forward(p, x);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);

  // 2-2-1 with one hidden unit clamped by ReLU.
  MlpParams<double> q = init_params<double>(1, {2, 2, 1});
  q.weights[0] << 1.0, -1.0, 1.0, -1.0;
  q.biases[0].setZero();
  q.weights[1] << 2.0, 5.0;
  q.biases[1] << -1.0;
  DenseVector<double> in(2);
  in << 1.0, 2.0;  // pre-activation (3, -3) -> (3, 0)
  CHECK(forward(q, in)[0] == 5.0);

  DenseVector<double> wrong(4);
  wrong.setZero();
  CHECK_THROWS_AS(forward(q, wrong), std::invalid_argument);
}

TEST_CASE("batched forward equals row-by-row forward", "[mlp]") {
  // Same function, but Eigen picks different product kernels for 1-row and
  // 5-row operands, so agreement is to rounding, not bitwise.
  MlpParams<double> p = init_params<double>(42);
  Batch<double> b = random_batch(3, 5, 3, 2);
  DenseMatrix<double> out = forward_batch(p, b.inputs);
  REQUIRE(out.rows() == 5);
  REQUIRE(out.cols() == 2);
  for (int i = 0; i < 5; ++i) {
    const DenseVector<double> row = b.inputs.row(i).transpose();
    DenseVector<double> single = forward(p, row);
    CHECK(single[0] == Approx(out(i, 0)).epsilon(1e-12).margin(1e-15));
    CHECK(single[1] == Approx(out(i, 1)).epsilon(1e-12).margin(1e-15));
  }
}

TEST_CASE("input transform maps column extremes to the unit interval", "[mlp]") {
  DenseMatrix<double> cols(3, 3);
  cols << 0.0, -4.0, 9.0,
          5.0, -4.0, 9.5,
         10.0, -4.0, 10.0;
  InputTransform<double> t = fit_input_transform(cols);
  CHECK(t.offset[0] == Approx(5.0));
  CHECK(t.scale[0] == Approx(0.2));
  CHECK(t.scale[1] == 0.0);  // constant column collapses to zero

  // Identity single-layer net exposes the transform through forward().
  MlpParams<double> p = init_params<double>(1, {3, 3});
  p.weights[0] = DenseMatrix<double>::Identity(3, 3);
  p.biases[0].setZero();
  p.input_transform = t;
  DenseMatrix<double> out = forward_batch(p, cols);
  CHECK(out(0, 0) == Approx(-1.0));
  CHECK(out(2, 0) == Approx(1.0));
  CHECK(out(1, 0) == Approx(0.0));
  for (int i = 0; i < 3; ++i) CHECK(out(i, 1) == 0.0);
  CHECK(out(0, 2) == Approx(-1.0));
  CHECK(out(2, 2) == Approx(1.0));
}

TEST_CASE("loss closed form and batch validation", "[mlp]") {
  MlpParams<double> p = init_params<double>(1, {3, 2});
  p.weights[0].setZero();
  p.biases[0].setZero();
  Batch<double> b;
  b.inputs = DenseMatrix<double>::Zero(2, 3);
  b.targets.resize(2, 2);
  b.targets << 1.0, 2.0, 3.0, 4.0;  // ||R||_F^2 = 30, N = 2
  CHECK(loss(p, b) == Approx(15.0).margin(1e-13));

  Batch<double> empty;
  empty.inputs.resize(0, 3);
  empty.targets.resize(0, 2);
  CHECK_THROWS_AS(loss(p, empty), std::invalid_argument);
  Batch<double> ragged = b;
  ragged.targets.conservativeResize(1, 2);
  CHECK_THROWS_AS(loss(p, ragged), std::invalid_argument);
  Batch<double> wide = b;
  wide.targets.conservativeResize(2, 3);
  CHECK_THROWS_AS(grad(p, wide), std::invalid_argument);
}

TEST_CASE("analytic gradient matches central differences everywhere", "[mlp]") {
  MlpParams<double> p = init_params<double>(11, {3, 8, 5, 2});
  Batch<double> b = random_batch(21, 16, 3, 2);
  p.input_transform = fit_input_transform(b.inputs);
  Gradients<double> g = grad(p, b);

  const double h = 1e-6;
  auto check_coord = [&](auto& ref, double analytic) {
    const double save = ref;
    ref = save + h;
    const double up = loss(p, b);
    ref = save - h;
    const double down = loss(p, b);
    ref = save;
    const double fd = (up - down) / (2.0 * h);
    CHECK(analytic == Approx(fd).epsilon(1e-4).margin(1e-9));
  };

  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < p.weights[l].cols(); ++j)
        check_coord(p.weights[l](i, j), g.weights[l](i, j));
    for (Eigen::Index j = 0; j < p.biases[l].size(); ++j)
      check_coord(p.biases[l][j], g.biases[l][j]);
  }
}

TEST_CASE("relu subgradient at zero is zero", "[mlp]") {
  MlpParams<double> p = init_params<double>(2, {3, 4, 2});
  p.weights[0].col(1).setZero();
  p.biases[0][1] = 0.0;  // unit 1 pre-activation is exactly 0 for every row
  Batch<double> b = random_batch(5, 6, 3, 2);
  Gradients<double> g = grad(p, b);
  CHECK(g.weights[0].col(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.biases[0][1] == 0.0);
}

TEST_CASE("adam_step agrees with a scalar reference for 200 steps", "[mlp]") {
  MlpParams<double> p = init_params<double>(1, {1, 1});
  p.weights[0](0, 0) = 1.0;
  p.biases[0][0] = 0.0;
  Batch<double> b;
  b.inputs = DenseMatrix<double>::Constant(1, 1, 1.0);
  b.targets = DenseMatrix<double>::Zero(1, 1);

  AdamState<double> s = init_adam(p);
  s.lr = 0.01;
  ScalarAdam ref;
  ref.lr = 0.01;
  double w = 1.0, bias = 0.0;
  const double initial_loss = loss(p, b);

  for (int k = 0; k < 200; ++k) {
    Gradients<double> g = grad(p, b);
    // d/dw of (w + b)^2 with x = 1, target 0.
    const double res = w + bias;
    CHECK(g.weights[0](0, 0) == Approx(2.0 * res).margin(1e-12));
    CHECK(g.biases[0][0] == Approx(2.0 * res).margin(1e-12));
    adam_step(p, g, s);
    ref.step(w, bias, 2.0 * res, 2.0 * res);
    CHECK(p.weights[0](0, 0) == Approx(w).margin(1e-12));
    CHECK(p.biases[0][0] == Approx(bias).margin(1e-12));
  }
  CHECK(loss(p, b) < initial_loss);
  CHECK(std::fabs(w + bias) < 0.05);  // the fitted function has collapsed to ~0

  // First fresh step moves each coordinate by about -lr*sign(gradient).
  MlpParams<double> q = init_params<double>(1, {1, 1});
  q.weights[0](0, 0) = 1.0;
  AdamState<double> s2 = init_adam(q);
  s2.lr = 0.1;
  Gradients<double> g2 = grad(q, b);
  adam_step(q, g2, s2);
  CHECK(q.weights[0](0, 0) == Approx(0.9).margin(1e-7));

  AdamState<double> wrong = init_adam(q);
  wrong.m_weights.pop_back();
  CHECK_THROWS_AS(adam_step(q, g2, wrong), std::invalid_argument);
}

TEST_CASE("train stops on threshold with healthy descent", "[mlp]") {
  // Learnable linear map y = (x0 + x1, x0 - x2) with a generous threshold.
  Rng rng(5);
  Batch<double> b;
  b.inputs.resize(64, 3);
  b.targets.resize(64, 2);
  for (int i = 0; i < 64; ++i) {
    for (int j = 0; j < 3; ++j) b.inputs(i, j) = rng.uniform(-1.0, 1.0);
    b.targets(i, 0) = b.inputs(i, 0) + b.inputs(i, 1);
    b.targets(i, 1) = b.inputs(i, 0) - b.inputs(i, 2);
  }
  TrainConfig cfg;
  cfg.layer_dims = {3, 16, 2};
  cfg.loss_threshold = 5e-2;
  cfg.max_epochs = 20000;
  cfg.lr = 1e-2;
  cfg.seed = 3;
  TrainResult<double> r = train(b, cfg);
  CHECK(r.stop == StopReason::Threshold);
  CHECK(r.loss_history.back() < cfg.loss_threshold);
  CHECK(r.epochs == static_cast<long>(r.loss_history.size()) - 1);
  CHECK(r.loss_history.front() > r.loss_history.back());
  CHECK(!r.params.input_transform.identity());

  // Same configuration twice is bitwise deterministic.
  TrainResult<double> r2 = train(b, cfg);
  REQUIRE(r2.loss_history.size() == r.loss_history.size());
  CHECK(r2.loss_history == r.loss_history);
  for (std::size_t l = 0; l < r.params.layer_count(); ++l)
    CHECK(r2.params.weights[l] == r.params.weights[l]);
}

TEST_CASE("train stops at max_epochs and on plateau", "[mlp]") {
  Batch<double> b = random_batch(9, 32, 3, 2);
  TrainConfig cfg;
  cfg.layer_dims = {3, 8, 2};
  cfg.loss_threshold = 1e-30;
  cfg.max_epochs = 3;
  TrainResult<double> r = train(b, cfg);
  CHECK(r.stop == StopReason::MaxEpochs);
  CHECK(r.epochs == 3);
  CHECK(r.loss_history.size() == 4);

  cfg.max_epochs = 100000;
  cfg.plateau_window = 5;
  cfg.plateau_rel_improvement = 0.9;  // any slow epoch triggers the plateau
  TrainResult<double> rp = train(b, cfg);
  CHECK(rp.stop == StopReason::Plateau);
  CHECK(rp.loss_history.size() > 5);

  cfg.max_epochs = 0;
  CHECK_THROWS_AS(train(b, cfg), std::invalid_argument);
}

TEST_CASE("train reports divergence with the partial history", "[mlp]") {
  Batch<double> b = random_batch(13, 8, 3, 2);
  TrainConfig cfg;
  cfg.layer_dims = {3, 4, 2};
  cfg.loss_threshold = 1e-30;
  cfg.lr = 1e120;  // absurd step size overflows within a few epochs
  cfg.max_epochs = 50;
  try {
    train(b, cfg);
    FAIL("expected TrainingDivergedError");
  } catch (const TrainingDivergedError& e) {
    CHECK(!e.history().empty());
    for (double v : e.history()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("monotone envelope flag", "[mlp]") {
  CHECK(monotone_envelope_ok({5.0, 4.0, 3.0}, 8));  // shorter than the window
  std::vector<double> noisy = {10, 9, 11, 8, 10, 7, 9, 6, 8, 5};
  CHECK(monotone_envelope_ok(noisy, 3));
  std::vector<double> rebound = {5, 4, 3, 2, 1, 6, 7, 8, 9, 10};
  CHECK(!monotone_envelope_ok(rebound, 3));
  std::vector<double> flat(10, 3.0);
  CHECK(monotone_envelope_ok(flat, 2));
}

TEST_CASE("float training instantiates and descends", "[mlp]") {
  Batch<float> b;
  Rng rng(17);
  b.inputs.resize(32, 3);
  b.targets.resize(32, 2);
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 3; ++j) b.inputs(i, j) = static_cast<float>(rng.uniform(-1.0, 1.0));
    b.targets(i, 0) = 0.5f * b.inputs(i, 0);
    b.targets(i, 1) = b.inputs(i, 2);
  }
  TrainConfig cfg;
  cfg.layer_dims = {3, 8, 2};
  cfg.max_epochs = 300;
  cfg.loss_threshold = 1e-30;
  cfg.lr = 1e-2;
  TrainResult<float> r = train<float>(b, cfg);
  CHECK(r.loss_history.back() < r.loss_history.front());
}
