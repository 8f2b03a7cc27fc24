#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sglab/grid.hpp"
#include "sglab/solver.hpp"

namespace sglab {

// Discrete time derivative of one history row: centered in the interior,
// one-sided first order at t = 0 and t = T.
inline Field time_derivative_row(const StateHistory& h, std::size_t n) {
  const std::size_t nt = h.rows();
  if (nt < 2) throw std::invalid_argument("time_derivative: need at least 2 rows");
  if (n >= nt) throw std::invalid_argument("time_derivative: row out of range");
  const double dt = h.grid.dt;
  Field out(h.grid);
  if (n == 0) {
    for (std::size_t i = 0; i < h.grid.nx; ++i)
      out.values[i] = (h.at(1, i) - h.at(0, i)) / dt;
  } else if (n + 1 == nt) {
    for (std::size_t i = 0; i < h.grid.nx; ++i)
      out.values[i] = (h.at(n, i) - h.at(n - 1, i)) / dt;
  } else {
    for (std::size_t i = 0; i < h.grid.nx; ++i)
      out.values[i] = (h.at(n + 1, i) - h.at(n - 1, i)) / (2.0 * dt);
  }
  return out;
}

inline std::vector<Field> time_derivative(const StateHistory& h) {
  std::vector<Field> out;
  out.reserve(h.rows());
  for (std::size_t n = 0; n < h.rows(); ++n) out.push_back(time_derivative_row(h, n));
  return out;
}

// Energy E(t) = |w'(t)|^2_{L2} + ||w(t)||^2_{H1} against the Gronwall bound
// e^{2t} (E(0) + \int_0^t |g(s)|^2_{L2} ds). The constant e^{2t} comes from
// E' <= 2E + |g|^2; it is sufficient, not sharp. E(0) is the discrete energy
// of row 0, so the bound holds with equality at t = 0 by construction.
struct EnergyReport {
  std::vector<double> times;
  std::vector<double> energy;
  std::vector<double> bound;
  std::vector<char> satisfied;  // per sample; 1 = within bound
  bool all_satisfied = true;
};

template <typename Forcing>
EnergyReport energy_series(const StateHistory& h, Forcing&& g) {
  const std::size_t nt = h.rows();
  if (nt < 2) throw std::invalid_argument("energy_series: need at least 2 rows");
  EnergyReport r;
  r.times.resize(nt);
  r.energy.resize(nt);
  r.bound.resize(nt);
  r.satisfied.resize(nt);

  std::vector<double> gnorm(nt);
  for (std::size_t n = 0; n < nt; ++n) {
    const double t = h.grid.t(n);
    Field gf = sample_field(h.grid, [&](double x) { return g(x, t); });
    gnorm[n] = l2_norm_sq(gf);
  }

  double cumulative = 0.0;
  double e0 = 0.0;
  for (std::size_t n = 0; n < nt; ++n) {
    if (n > 0) cumulative += 0.5 * h.grid.dt * (gnorm[n - 1] + gnorm[n]);
    Field wdot = time_derivative_row(h, n);
    const double e = l2_norm_sq(wdot) + h1_norm_sq(h.row_field(n));
    if (n == 0) e0 = e;
    const double t = h.grid.t(n);
    const double b = std::exp(2.0 * t) * (e0 + cumulative);
    r.times[n] = t;
    r.energy[n] = e;
    r.bound[n] = b;
    r.satisfied[n] = e <= b + 1e-9 * (1.0 + b) ? 1 : 0;
    if (!r.satisfied[n]) r.all_satisfied = false;
  }
  return r;
}

inline EnergyReport energy_series(const StateHistory& h) {
  return energy_series(h, [](double, double) { return 0.0; });
}

// Empirical continuous-dependence constant: the worst over time of
// [ |w2'-w1'|^2_{L2} + ||w2-w1||^2_{H1} ] / (d0 + dg), where d0 is the
// initial-data gap and dg the forcing gap supplied by the caller. A zero
// denominator with a nonzero numerator returns +infinity (a violation).
inline double stability_gap(const StateHistory& h1, const StateHistory& h2, double d0,
                            double dg) {
  if (!(h1.grid == h2.grid)) throw std::invalid_argument("stability_gap: grid mismatch");
  if (h1.kind != h2.kind) throw std::invalid_argument("stability_gap: kind mismatch");
  if (h1.rows() != h2.rows()) throw std::invalid_argument("stability_gap: row count mismatch");
  const std::size_t nt = h1.rows();
  const std::size_t nx = h1.grid.nx;

  StateHistory diff;
  diff.grid = h1.grid;
  diff.kind = h1.kind;
  diff.data.resize(nt * nx);
  for (std::size_t k = 0; k < diff.data.size(); ++k) diff.data[k] = h2.data[k] - h1.data[k];

  double worst = 0.0;
  for (std::size_t n = 0; n < nt; ++n) {
    Field ddot = time_derivative_row(diff, n);
    const double num = l2_norm_sq(ddot) + h1_norm_sq(diff.row_field(n));
    if (num > worst) worst = num;
  }
  const double den = d0 + dg;
  if (worst == 0.0) return 0.0;
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return worst / den;
}

// Least-squares slope of log(err) against log(h) over refinement levels.
inline double convergence_order(std::span<const std::pair<double, double>> errors) {
  if (errors.size() < 2) throw std::invalid_argument("convergence_order: need >= 2 levels");
  double mx = 0.0, my = 0.0;
  for (auto [h, e] : errors) {
    if (!(h > 0.0)) throw std::invalid_argument("convergence_order: grid sizes must be > 0");
    if (!(e > 0.0)) throw std::invalid_argument("convergence_order: errors must be > 0");
    mx += std::log(h);
    my += std::log(e);
  }
  mx /= static_cast<double>(errors.size());
  my /= static_cast<double>(errors.size());
  double sxx = 0.0, sxy = 0.0;
  for (auto [h, e] : errors) {
    const double dx = std::log(h) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(e) - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("convergence_order: refinement levels must differ");
  return sxy / sxx;
}

// Damped-problem energy check: for every t,
//   |w'(t)|^2 + ||w(t)||^2_{H1} + \int_0^t ||w'(s)||^2_{H1} ds
//     <= C ( ||u0||^2_{H1} + |v0|^2 + ||g||^2_{L2(0,T;L2)} ),
// with C = e^{2T} * max(1, 1/lambda). The forcing norm on the right is the
// L2 norm, which dominates the dual norm the estimate actually needs, so the
// check is conservative. u0/v0 are the discrete row 0 and its one-sided
// derivative.
struct DampedEnergyReport {
  std::vector<double> times;
  std::vector<double> lhs;
  double bound = 0.0;
  double max_lhs = 0.0;
  double margin = 0.0;  // bound - max_lhs
  bool satisfied = true;
};

template <typename Forcing>
DampedEnergyReport damped_energy_check(const StateHistory& h, double lambda, Forcing&& g) {
  if (!(std::isfinite(lambda) && lambda > 0.0))
    throw std::invalid_argument("damping: must be > 0 for the damped energy check");
  const std::size_t nt = h.rows();
  if (nt < 2) throw std::invalid_argument("damped_energy_check: need at least 2 rows");

  DampedEnergyReport r;
  r.times.resize(nt);
  r.lhs.resize(nt);

  double g_total = 0.0;
  {
    double prev = 0.0;
    for (std::size_t n = 0; n < nt; ++n) {
      const double t = h.grid.t(n);
      Field gf = sample_field(h.grid, [&](double x) { return g(x, t); });
      const double cur = l2_norm_sq(gf);
      if (n > 0) g_total += 0.5 * h.grid.dt * (prev + cur);
      prev = cur;
    }
  }

  double cumulative = 0.0;
  double prev_h1dot = 0.0;
  for (std::size_t n = 0; n < nt; ++n) {
    Field wdot = time_derivative_row(h, n);
    const double h1dot = h1_norm_sq(wdot);
    if (n > 0) cumulative += 0.5 * h.grid.dt * (prev_h1dot + h1dot);
    prev_h1dot = h1dot;
    r.times[n] = h.grid.t(n);
    r.lhs[n] = l2_norm_sq(wdot) + h1_norm_sq(h.row_field(n)) + cumulative;
    if (r.lhs[n] > r.max_lhs) r.max_lhs = r.lhs[n];
  }

  Field v0 = time_derivative_row(h, 0);
  const double data = h1_norm_sq(h.row_field(0)) + l2_norm_sq(v0) + g_total;
  const double c = std::exp(2.0 * h.grid.horizon) * std::max(1.0, 1.0 / lambda);
  r.bound = c * data;
  r.margin = r.bound - r.max_lhs;
  r.satisfied = r.max_lhs <= r.bound + 1e-9 * (1.0 + r.bound);
  return r;
}

}  // namespace sglab
