#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <future>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sglab/diagnostics.hpp"
#include "sglab/grid.hpp"
#include "sglab/mlp.hpp"
#include "sglab/rng.hpp"
#include "sglab/solver.hpp"

namespace sglab {

// Worker cap for the independent forward solves: SG_LAB_THREADS if set and
// valid, otherwise the hardware concurrency.
inline unsigned thread_limit() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SG_LAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
  }
  return hw;
}

// Frequency family omega in [target - half_width, target + half_width],
// target = mode*pi/L. The inclusive uniform grid with an even count has no
// midpoint member, so the member nearest the target is snapped onto it
// exactly; downstream bookkeeping (noise injection, evaluation) relies on
// rows satisfying omega == target bit-for-bit.
struct FamilySpec {
  int mode = 4;
  double half_length = 13.0;
  int omega_count = 50;
  double half_width = 0.5;

  double target() const { return static_cast<double>(mode) * std::numbers::pi / half_length; }
  double lo() const { return target() - half_width; }
  double hi() const { return target() + half_width; }

  int target_index() const {
    return static_cast<int>(std::llround(0.5 * static_cast<double>(omega_count - 1)));
  }

  std::vector<double> members() const {
    if (mode < 1) throw std::invalid_argument("family.mode: must be >= 1");
    if (omega_count < 2) throw std::invalid_argument("family.count: must be >= 2");
    if (!(half_length > 0.0)) throw std::invalid_argument("family.half_length: must be > 0");
    if (!(half_width > 0.0 && half_width < target()))
      throw std::invalid_argument("family.half_width: must lie in (0, target)");
    std::vector<double> out(omega_count);
    const double step = (hi() - lo()) / static_cast<double>(omega_count - 1);
    for (int k = 0; k < omega_count; ++k) out[k] = lo() + step * static_cast<double>(k);
    out[target_index()] = target();
    return out;
  }
};

// Initial profile pair u0(x) = cos(omega x), v0(x) = -omega sin(omega x).
inline std::pair<Field, Field> family_initials(double omega, const GridSpec& grid) {
  Field u0 = sample_field(grid, [&](double x) { return std::cos(omega * x); });
  Field v0 = sample_field(grid, [&](double x) { return -omega * std::sin(omega * x); });
  return {std::move(u0), std::move(v0)};
}

struct SampleRow {
  double x = 0.0;
  double omega = 0.0;
  double t = 0.0;
  double eta = 0.0;
  double eta_t = 0.0;
  bool noisy = false;
};

namespace detail {

// Time rows: always {0, 1}; the remaining count-2 at the uniform interior
// partition of [0, T]. Keeps the t=0 and t=dt slices that pin the initial
// state and spreads the rest without duplicating endpoints.
inline std::vector<std::size_t> dataset_time_indices(std::size_t nt, int count) {
  if (count < 2) throw std::invalid_argument("dataset.time_samples: must be >= 2");
  if (static_cast<std::size_t>(count) > nt)
    throw std::invalid_argument("dataset.time_samples: exceeds available time slices");
  std::vector<std::size_t> idx{0, 1};
  for (int k = 1; k + 1 < count; ++k) {
    const double pos = static_cast<double>(nt - 1) * static_cast<double>(k) /
                       static_cast<double>(count - 1);
    idx.push_back(static_cast<std::size_t>(std::llround(pos)));
  }
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw std::invalid_argument("dataset.time_samples: too many samples for this grid");
  return idx;
}

inline std::vector<std::size_t> dataset_space_indices(std::size_t nx, int count) {
  if (count < 2) throw std::invalid_argument("dataset.space_samples: must be >= 2");
  if (static_cast<std::size_t>(count) > nx)
    throw std::invalid_argument("dataset.space_samples: exceeds grid points");
  std::vector<std::size_t> idx(count);
  for (int i = 0; i < count; ++i)
    idx[i] = static_cast<std::size_t>(std::llround(static_cast<double>(nx - 1) *
                                                   static_cast<double>(i) /
                                                   static_cast<double>(count - 1)));
  return idx;
}

}  // namespace detail

// Solve the perturbation problem for every family member, sample the chosen
// space-time lattice, and add N(0, sigma^2) noise to both targets on the rows
// at the target frequency. Row order: omega index, then time, then space.
inline std::vector<SampleRow> generate_dataset(const FamilySpec& family,
                                               const ProblemConfig& base, int time_samples,
                                               int space_samples, double sigma,
                                               std::uint64_t seed) {
  if (!(std::isfinite(sigma) && sigma >= 0.0))
    throw std::invalid_argument("dataset.noise_sigma: must be >= 0");
  if (base.kind != ProblemKind::Perturbation)
    throw std::invalid_argument("problem.kind: dataset generation expects the perturbation form");
  const std::vector<double> omegas = family.members();
  const GridSpec& grid = base.grid;
  const auto t_idx = detail::dataset_time_indices(grid.nt, time_samples);
  const auto x_idx = detail::dataset_space_indices(grid.nx, space_samples);

  struct PerOmega {
    std::vector<double> eta;    // time-major sampled values
    std::vector<double> eta_t;
  };
  std::vector<PerOmega> sampled(omegas.size());

  auto solve_one = [&](std::size_t k) {
    ProblemConfig cfg = base;
    auto [u0, v0] = family_initials(omegas[k], grid);
    cfg.initial_value = std::move(u0);
    cfg.initial_velocity = std::move(v0);
    StateHistory h = solve(cfg);
    PerOmega out;
    out.eta.reserve(t_idx.size() * x_idx.size());
    out.eta_t.reserve(t_idx.size() * x_idx.size());
    for (std::size_t n : t_idx) {
      Field dot = time_derivative_row(h, n);
      for (std::size_t i : x_idx) {
        out.eta.push_back(h.at(n, i));
        out.eta_t.push_back(dot.values[i]);
      }
    }
    sampled[k] = std::move(out);
  };

  const unsigned workers = std::min<unsigned>(thread_limit(), omegas.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < omegas.size(); ++k) solve_one(k);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t k = 0; k < omegas.size(); ++k) {
      pending.push_back(std::async(std::launch::async, solve_one, k));
      if (pending.size() == workers) {
        for (auto& f : pending) f.get();
        pending.clear();
      }
    }
    for (auto& f : pending) f.get();
  }

  std::vector<SampleRow> rows;
  rows.reserve(omegas.size() * t_idx.size() * x_idx.size());
  Rng noise(seed);
  const double target = family.target();
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    const bool at_target = omegas[k] == target;
    std::size_t flat = 0;
    for (std::size_t n : t_idx) {
      for (std::size_t i : x_idx) {
        SampleRow r;
        r.x = grid.x(i);
        r.omega = omegas[k];
        r.t = grid.t(n);
        r.eta = sampled[k].eta[flat];
        r.eta_t = sampled[k].eta_t[flat];
        ++flat;
        if (at_target && sigma > 0.0) {
          r.eta += noise.normal(0.0, sigma);
          r.eta_t += noise.normal(0.0, sigma);
          r.noisy = true;
        }
        rows.push_back(r);
      }
    }
  }
  return rows;
}

template <typename Scalar = double>
Batch<Scalar> make_batch(const std::vector<SampleRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("dataset: no rows");
  Batch<Scalar> b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  b.inputs.resize(n, 3);
  b.targets.resize(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    const SampleRow& s = rows[static_cast<std::size_t>(r)];
    b.inputs(r, 0) = static_cast<Scalar>(s.x);
    b.inputs(r, 1) = static_cast<Scalar>(s.omega);
    b.inputs(r, 2) = static_cast<Scalar>(s.t);
    b.targets(r, 0) = static_cast<Scalar>(s.eta);
    b.targets(r, 1) = static_cast<Scalar>(s.eta_t);
  }
  return b;
}

// Network evaluated at (x, target_omega, 0) over the grid: the learned
// initial state and velocity.
template <typename Scalar>
std::pair<Field, Field> reconstruct_initial(const MlpParams<Scalar>& p, const FamilySpec& family,
                                            const GridSpec& grid) {
  DenseMatrix<Scalar> inputs(static_cast<Eigen::Index>(grid.nx), 3);
  for (std::size_t i = 0; i < grid.nx; ++i) {
    inputs(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(grid.x(i));
    inputs(static_cast<Eigen::Index>(i), 1) = static_cast<Scalar>(family.target());
    inputs(static_cast<Eigen::Index>(i), 2) = Scalar(0);
  }
  DenseMatrix<Scalar> out = forward_batch(p, inputs);
  Field u0(grid), v0(grid);
  for (std::size_t i = 0; i < grid.nx; ++i) {
    u0.values[i] = static_cast<double>(out(static_cast<Eigen::Index>(i), 0));
    v0.values[i] = static_cast<double>(out(static_cast<Eigen::Index>(i), 1));
  }
  return {std::move(u0), std::move(v0)};
}

// Plain pointwise mean squared errors over the grid, one per component.
inline std::pair<double, double> evaluate_initials(const Field& u0_nn, const Field& v0_nn,
                                                   const Field& u0, const Field& v0) {
  detail::require_same_grid(u0_nn, u0, "evaluate_initials");
  detail::require_same_grid(v0_nn, v0, "evaluate_initials");
  double su = 0.0, sv = 0.0;
  const std::size_t n = u0.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double du = u0_nn.values[i] - u0.values[i];
    const double dv = v0_nn.values[i] - v0.values[i];
    su += du * du;
    sv += dv * dv;
  }
  return {su / static_cast<double>(n), sv / static_cast<double>(n)};
}

// Final-network loss split into its two components (the two MSE columns of a
// downsampling report).
template <typename Scalar>
std::pair<double, double> component_losses(const MlpParams<Scalar>& p, const Batch<Scalar>& b) {
  DenseMatrix<Scalar> pred = forward_batch(p, b.inputs);
  DenseMatrix<double> r = (pred - b.targets).template cast<double>();
  const double n = static_cast<double>(b.inputs.rows());
  return {r.col(0).squaredNorm() / n, r.col(1).squaredNorm() / n};
}

struct InverseReport {
  int time_samples = 0;
  int space_samples = 0;
  long epochs = 0;
  double loss_eta = 0.0;
  double loss_eta_t = 0.0;
  double mse_u0 = 0.0;
  double mse_v0 = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct InverseRunConfig {
  FamilySpec family;
  ProblemConfig problem;  // initial fields ignored; filled per family member
  int time_samples = 3;
  int space_samples = 50;
  double noise_sigma = 0.0;
  std::uint64_t data_seed = 0;
  TrainConfig training;
};

template <typename Scalar = double>
struct InverseOutcome {
  std::vector<SampleRow> dataset;
  TrainResult<Scalar> training;
  Field u0_nn, v0_nn, u0_true, v0_true;
  InverseReport report;
};

// End-to-end inverse run: dataset, training, reconstruction, metrics.
template <typename Scalar = double>
InverseOutcome<Scalar> run_inverse(const InverseRunConfig& cfg) {
  InverseOutcome<Scalar> out;
  out.dataset = generate_dataset(cfg.family, cfg.problem, cfg.time_samples, cfg.space_samples,
                                 cfg.noise_sigma, cfg.data_seed);
  Batch<Scalar> batch = make_batch<Scalar>(out.dataset);
  out.training = train(batch, cfg.training);

  auto [u0_nn, v0_nn] = reconstruct_initial(out.training.params, cfg.family, cfg.problem.grid);
  out.u0_nn = std::move(u0_nn);
  out.v0_nn = std::move(v0_nn);
  auto [u0, v0] = family_initials(cfg.family.target(), cfg.problem.grid);
  out.u0_true = std::move(u0);
  out.v0_true = std::move(v0);

  auto [mse_u0, mse_v0] = evaluate_initials(out.u0_nn, out.v0_nn, out.u0_true, out.v0_true);
  auto [le, lt] = component_losses(out.training.params, batch);
  out.report.time_samples = cfg.time_samples;
  out.report.space_samples = cfg.space_samples;
  out.report.epochs = out.training.epochs;
  out.report.loss_eta = le;
  out.report.loss_eta_t = lt;
  out.report.mse_u0 = mse_u0;
  out.report.mse_v0 = mse_v0;
  out.report.noise_sigma = cfg.noise_sigma;
  out.report.seed = cfg.training.seed;
  return out;
}

}  // namespace sglab
