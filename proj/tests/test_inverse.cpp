#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "sglab/inverse.hpp"

using Catch::Approx;
using namespace sglab;

namespace {

struct EnvGuard {
  std::string name;
  std::string saved;
  bool had = false;
  explicit EnvGuard(const char* n) : name(n) {
    if (const char* v = std::getenv(n)) {
      saved = v;
      had = true;
    }
  }
  ~EnvGuard() {
    if (had)
      ::setenv(name.c_str(), saved.c_str(), 1);
    else
      ::unsetenv(name.c_str());
  }
};

ProblemConfig perturbation_base(const GridSpec& g) {
  ProblemConfig c;
  c.kind = ProblemKind::Perturbation;
  c.grid = g;
  c.epsilon = 0.05;
  c.soliton = {0.5, 0.0};
  c.initial_value = Field(g);
  c.initial_velocity = Field(g);
  return c;
}

FamilySpec small_family(int count) {
  FamilySpec f;
  f.mode = 4;
  f.half_length = 13.0;
  f.omega_count = count;
  f.half_width = 0.5;
  return f;
}

}  // namespace

TEST_CASE("thread_limit honors the environment variable", "[inverse]") {
  EnvGuard guard("SG_LAB_THREADS");
  ::setenv("SG_LAB_THREADS", "3", 1);
  CHECK(thread_limit() == 3u);
  ::setenv("SG_LAB_THREADS", "1", 1);
  CHECK(thread_limit() == 1u);
  ::setenv("SG_LAB_THREADS", "0", 1);
  CHECK(thread_limit() >= 1u);  // invalid -> hardware fallback
  ::setenv("SG_LAB_THREADS", "abc", 1);
  CHECK(thread_limit() >= 1u);
  ::unsetenv("SG_LAB_THREADS");
  CHECK(thread_limit() >= 1u);
}

TEST_CASE("frequency family brackets and hits the target", "[inverse]") {
  FamilySpec f = small_family(50);
  const double target = 4.0 * std::numbers::pi / 13.0;
  CHECK(f.target() == Approx(target).margin(1e-15));
  std::vector<double> w = f.members();
  REQUIRE(w.size() == 50);
  CHECK(w.front() == Approx(target - 0.5).margin(1e-12));
  CHECK(w.back() == Approx(target + 0.5).margin(1e-12));
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] > w[i - 1]);
  CHECK(f.target_index() == 25);
  CHECK(w[25] == f.target());  // snapped bit-for-bit

  FamilySpec odd = small_family(51);
  CHECK(odd.target_index() == 25);
  CHECK(odd.members()[25] == odd.target());

  FamilySpec bad = f;
  bad.mode = 0;
  CHECK_THROWS_AS(bad.members(), std::invalid_argument);
  bad = f;
  bad.omega_count = 1;
  CHECK_THROWS_AS(bad.members(), std::invalid_argument);
  bad = f;
  bad.half_width = 0.0;
  CHECK_THROWS_AS(bad.members(), std::invalid_argument);
  bad = f;
  bad.half_width = 1.0;  // >= target ~ 0.9666
  CHECK_THROWS_AS(bad.members(), std::invalid_argument);
}

TEST_CASE("family initial profiles", "[inverse]") {
  GridSpec g = make_grid(13.0, 101, 1.0, 0.2);
  auto [u0, v0] = family_initials(2.0, g);
  for (std::size_t i : {std::size_t{0}, std::size_t{50}, std::size_t{100}}) {
    CHECK(u0.values[i] == Approx(std::cos(2.0 * g.x(i))).margin(1e-15));
    CHECK(v0.values[i] == Approx(-2.0 * std::sin(2.0 * g.x(i))).margin(1e-15));
  }
}

TEST_CASE("dataset index rules", "[inverse]") {
  using detail::dataset_space_indices;
  using detail::dataset_time_indices;

  CHECK(dataset_time_indices(771, 2) == std::vector<std::size_t>{0, 1});
  CHECK(dataset_time_indices(771, 3) == std::vector<std::size_t>{0, 1, 385});
  CHECK(dataset_time_indices(771, 5) == std::vector<std::size_t>{0, 1, 193, 385, 578});
  CHECK(dataset_time_indices(5, 3) == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(dataset_time_indices(771, 1), std::invalid_argument);
  CHECK_THROWS_AS(dataset_time_indices(4, 5), std::invalid_argument);
  CHECK_THROWS_AS(dataset_time_indices(3, 3), std::invalid_argument);  // {0,1,1} collides

  std::vector<std::size_t> xs = dataset_space_indices(201, 50);
  REQUIRE(xs.size() == 50);
  CHECK(xs.front() == 0);
  CHECK(xs.back() == 200);
  for (std::size_t i = 1; i < xs.size(); ++i) CHECK(xs[i] > xs[i - 1]);
  CHECK(dataset_space_indices(201, 2) == std::vector<std::size_t>{0, 200});
  CHECK_THROWS_AS(dataset_space_indices(201, 1), std::invalid_argument);
  CHECK_THROWS_AS(dataset_space_indices(3, 5), std::invalid_argument);
}

TEST_CASE("dataset rows mirror direct solves and mark noise", "[inverse]") {
  GridSpec g = make_grid(13.0, 51, 1.0, 0.3);
  ProblemConfig base = perturbation_base(g);
  FamilySpec fam = small_family(4);

  std::vector<SampleRow> rows = generate_dataset(fam, base, 2, 5, 0.0, 99);
  REQUIRE(rows.size() == 4 * 2 * 5);

  const std::vector<double> omegas = fam.members();
  const auto x_idx = detail::dataset_space_indices(g.nx, 5);
  CHECK(rows[0].omega == omegas[0]);
  CHECK(rows[0].t == 0.0);
  CHECK(rows[0].x == g.x(0));
  CHECK(rows[9].omega == omegas[0]);
  CHECK(rows[9].t == g.t(1));
  CHECK(rows[9].x == g.x(x_idx[4]));
  CHECK(rows[10].omega == omegas[1]);
  for (const SampleRow& r : rows) CHECK(!r.noisy);

  // Exact agreement with an independent solve of the first family member.
  ProblemConfig first = base;
  auto [u0, v0] = family_initials(omegas[0], g);
  first.initial_value = u0;
  first.initial_velocity = v0;
  StateHistory h = solve(first);
  Field dot0 = time_derivative_row(h, 0);
  for (int i = 0; i < 5; ++i) {
    CHECK(rows[i].eta == h.at(0, x_idx[i]));
    CHECK(rows[i].eta_t == dot0.values[x_idx[i]]);
  }

  // Noise lands only on target-frequency rows and is seed-stable.
  std::vector<SampleRow> noisy = generate_dataset(fam, base, 2, 5, 0.05, 99);
  std::vector<SampleRow> noisy2 = generate_dataset(fam, base, 2, 5, 0.05, 99);
  const double target = fam.target();
  std::size_t marked = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    CHECK(noisy[r].noisy == (noisy[r].omega == target));
    if (noisy[r].noisy) {
      ++marked;
      CHECK(std::fabs(noisy[r].eta - rows[r].eta) < 0.3);  // 6 sigma
      CHECK(std::fabs(noisy[r].eta_t - rows[r].eta_t) < 0.3);
    } else {
      CHECK(noisy[r].eta == rows[r].eta);
      CHECK(noisy[r].eta_t == rows[r].eta_t);
    }
    CHECK(noisy2[r].eta == noisy[r].eta);
    CHECK(noisy2[r].eta_t == noisy[r].eta_t);
  }
  CHECK(marked == 2 * 5);

  CHECK_THROWS_AS(generate_dataset(fam, base, 2, 5, -0.1, 0), std::invalid_argument);
  ProblemConfig full = base;
  full.kind = ProblemKind::Full;
  CHECK_THROWS_AS(generate_dataset(fam, full, 2, 5, 0.0, 0), std::invalid_argument);
}

TEST_CASE("parallel dataset generation matches serial", "[inverse]") {
  GridSpec g = make_grid(13.0, 51, 1.0, 0.3);
  ProblemConfig base = perturbation_base(g);
  FamilySpec fam = small_family(4);

  EnvGuard guard("SG_LAB_THREADS");
  ::setenv("SG_LAB_THREADS", "1", 1);
  std::vector<SampleRow> serial = generate_dataset(fam, base, 2, 5, 0.05, 7);
  ::setenv("SG_LAB_THREADS", "2", 1);
  std::vector<SampleRow> parallel = generate_dataset(fam, base, 2, 5, 0.05, 7);
  REQUIRE(parallel.size() == serial.size());
  for (std::size_t r = 0; r < serial.size(); ++r) {
    CHECK(parallel[r].eta == serial[r].eta);
    CHECK(parallel[r].eta_t == serial[r].eta_t);
    CHECK(parallel[r].noisy == serial[r].noisy);
  }
}

TEST_CASE("batch assembly maps rows to columns", "[inverse]") {
  std::vector<SampleRow> rows(3);
  rows[0] = {1.0, 2.0, 3.0, 4.0, 5.0, false};
  rows[1] = {-1.0, 0.5, 0.0, -0.25, 0.125, true};
  rows[2] = {0.0, 0.9, 1.5, 2.5, -3.5, false};
  Batch<double> b = make_batch<double>(rows);
  REQUIRE(b.inputs.rows() == 3);
  REQUIRE(b.inputs.cols() == 3);
  REQUIRE(b.targets.cols() == 2);
  CHECK(b.inputs(0, 0) == 1.0);
  CHECK(b.inputs(1, 1) == 0.5);
  CHECK(b.inputs(2, 2) == 1.5);
  CHECK(b.targets(0, 0) == 4.0);
  CHECK(b.targets(1, 1) == 0.125);

  Batch<float> bf = make_batch<float>(rows);
  CHECK(bf.inputs(0, 0) == 1.0f);
  CHECK(bf.targets(2, 1) == -3.5f);

  CHECK_THROWS_AS(make_batch<double>(std::vector<SampleRow>{}), std::invalid_argument);
}

TEST_CASE("reconstruction and metrics plumbing", "[inverse]") {
  GridSpec g = make_grid(13.0, 41, 1.0, 0.3);
  FamilySpec fam = small_family(4);

  MlpParams<double> p = init_params<double>(1, {3, 4, 2});
  for (auto& w : p.weights) w.setZero();
  p.biases[1] << 0.25, -0.5;
  auto [u0_nn, v0_nn] = reconstruct_initial(p, fam, g);
  for (double v : u0_nn.values) CHECK(v == 0.25);
  for (double v : v0_nn.values) CHECK(v == -0.5);

  Field u0(g), v0(g);
  for (std::size_t i = 0; i < g.nx; ++i) {
    u0.values[i] = 0.25 - 0.1;                        // constant gap 0.1
    v0.values[i] = -0.5 + (i % 2 == 0 ? 0.2 : -0.2);  // alternating 0.2
  }
  auto [mu, mv] = evaluate_initials(u0_nn, v0_nn, u0, v0);
  CHECK(mu == Approx(0.01).margin(1e-15));
  CHECK(mv == Approx(0.04).margin(1e-15));
  Field wrong(make_grid(13.0, 31, 1.0, 0.3));
  CHECK_THROWS_AS(evaluate_initials(u0_nn, v0_nn, wrong, v0), std::invalid_argument);

  // Component losses split the total loss exactly.
  Batch<double> b;
  b.inputs = DenseMatrix<double>::Zero(4, 3);
  b.targets.resize(4, 2);
  b.targets.col(0).setConstant(1.0);
  b.targets.col(1).setConstant(2.0);
  MlpParams<double> zero = init_params<double>(1, {3, 2});
  zero.weights[0].setZero();
  auto [le, lt] = component_losses(zero, b);
  CHECK(le == Approx(1.0).margin(1e-14));
  CHECK(lt == Approx(4.0).margin(1e-14));
  CHECK(le + lt == Approx(loss(zero, b)).epsilon(1e-12));
}

TEST_CASE("end-to-end inverse run on a miniature configuration", "[inverse]") {
  InverseRunConfig cfg;
  cfg.family = small_family(3);
  cfg.problem = perturbation_base(make_grid(13.0, 51, 1.0, 0.3));
  cfg.time_samples = 2;
  cfg.space_samples = 5;
  cfg.noise_sigma = 0.0;
  cfg.data_seed = 11;
  cfg.training.layer_dims = {3, 16, 2};
  cfg.training.max_epochs = 400;
  cfg.training.loss_threshold = 1e-30;
  cfg.training.lr = 1e-2;
  cfg.training.seed = 5;

  InverseOutcome<double> out = run_inverse<double>(cfg);
  CHECK(out.dataset.size() == 3 * 2 * 5);
  CHECK(out.report.time_samples == 2);
  CHECK(out.report.space_samples == 5);
  CHECK(out.report.noise_sigma == 0.0);
  CHECK(out.report.seed == 5);
  CHECK(out.report.epochs == out.training.epochs);
  CHECK(out.training.stop == StopReason::MaxEpochs);
  CHECK(out.training.loss_history.back() < out.training.loss_history.front());

  // Report metrics are recomputable from the outcome fields.
  auto [mu, mv] = evaluate_initials(out.u0_nn, out.v0_nn, out.u0_true, out.v0_true);
  CHECK(out.report.mse_u0 == Approx(mu).margin(1e-15));
  CHECK(out.report.mse_v0 == Approx(mv).margin(1e-15));
  for (std::size_t i = 0; i < cfg.problem.grid.nx; ++i)
    CHECK(out.u0_true.values[i] == std::cos(cfg.family.target() * cfg.problem.grid.x(i)));
  CHECK(out.report.loss_eta + out.report.loss_eta_t ==
        Approx(out.training.loss_history.back()).epsilon(1e-9));
}
