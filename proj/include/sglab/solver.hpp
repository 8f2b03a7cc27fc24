#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sglab/grid.hpp"
#include "sglab/soliton.hpp"

namespace sglab {

// Which evolution equation is stepped.
//   Full:          u_tt - u_xx + sin(u)                              = eps*g
//   Perturbation:  e_tt - e_xx + (sin(phi + eps*e) - sin(phi))/eps   = g
//   Linearized:    e_tt - e_xx + cos(phi)*e                          = g
// phi is the analytic kink sampled at each step.
enum class ProblemKind { Full, Perturbation, Linearized };

// Separable cosine forcing g(x,t) = amp_x*cos(mode*pi*x/L) + amp_t*cos(mode*pi*t/T).
struct ForcingSpec {
  double amp_x = 0.0;
  double amp_t = 0.0;
  int mode = 0;
  double half_length = 0.0;  // L, shared with the grid
  double horizon = 0.0;      // T, shared with the grid
};

inline double forcing_eval(const ForcingSpec& f, double x, double t) {
  if (f.amp_x == 0.0 && f.amp_t == 0.0) return 0.0;
  const double pi = std::numbers::pi;
  const double m = static_cast<double>(f.mode);
  return f.amp_x * std::cos(m * pi * x / f.half_length) +
         f.amp_t * std::cos(m * pi * t / f.horizon);
}

inline double nonlinear_term(ProblemKind kind, double phi, double w, double epsilon) {
  switch (kind) {
    case ProblemKind::Full:
      return std::sin(w);
    case ProblemKind::Perturbation:
      return (std::sin(phi + epsilon * w) - std::sin(phi)) / epsilon;
    case ProblemKind::Linearized:
      return std::cos(phi) * w;
  }
  throw std::logic_error("nonlinear_term: unknown kind");
}

struct ProblemConfig {
  ProblemKind kind = ProblemKind::Full;
  GridSpec grid;
  double epsilon = 1.0;       // in (0, 1]
  SolitonParams soliton;      // background kink for Perturbation/Linearized; forcing scale context for Full
  ForcingSpec forcing;
  BoundaryKind boundary = BoundaryKind::Neumann;
  double damping = 0.0;       // lambda >= 0; adds lambda*dt*(Lap w^n - Lap w^{n-1})
  Field initial_value;        // u0 (or eta0)
  Field initial_velocity;     // v0 (or eta_t at 0)
};

// Dense row-major record of every time slice of a run.
struct StateHistory {
  GridSpec grid;
  ProblemKind kind = ProblemKind::Full;
  std::vector<double> data;  // rows() * grid.nx values

  std::size_t rows() const { return grid.nx == 0 ? 0 : data.size() / grid.nx; }
  double at(std::size_t n, std::size_t i) const { return data[n * grid.nx + i]; }
  std::span<const double> row(std::size_t n) const {
    return {data.data() + n * grid.nx, grid.nx};
  }
  Field row_field(std::size_t n) const {
    auto r = row(n);
    return Field(grid, std::vector<double>(r.begin(), r.end()));
  }
};

// Thrown when a step produces a non-finite value. Carries the index of the
// first bad row and the finite rows computed before it.
class BlowupError : public std::runtime_error {
 public:
  BlowupError(std::size_t step, StateHistory partial)
      : std::runtime_error("solver: non-finite value at step " + std::to_string(step)),
        step_(step),
        partial_(std::move(partial)) {}
  std::size_t step() const { return step_; }
  const StateHistory& partial_history() const { return partial_; }

 private:
  std::size_t step_;
  StateHistory partial_;
};

namespace detail {

inline void validate_problem(const ProblemConfig& c) {
  auto bad = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (c.grid.nx < 3 || c.grid.nt < 2 || !(c.grid.dx > 0.0) || !(c.grid.dt > 0.0))
    bad("grid", "not a valid lattice (use make_grid)");
  if (!(std::isfinite(c.epsilon) && c.epsilon > 0.0 && c.epsilon <= 1.0))
    bad("epsilon", "must lie in (0, 1]");
  if (!(std::isfinite(c.damping) && c.damping >= 0.0)) bad("damping", "must be >= 0");
  if (c.forcing.mode < 0) bad("forcing.mode", "must be >= 0");
  if ((c.forcing.amp_x != 0.0 || c.forcing.amp_t != 0.0) &&
      (!(c.forcing.half_length > 0.0) || !(c.forcing.horizon > 0.0)))
    bad("forcing", "half_length and horizon must be > 0 when amplitudes are nonzero");
  if (!(c.initial_value.grid == c.grid)) bad("initial_value", "grid mismatch");
  if (!(c.initial_velocity.grid == c.grid)) bad("initial_velocity", "grid mismatch");
  lorentz_gamma(c.soliton.velocity);  // throws on |v| >= 1
}

inline bool row_finite(std::span<const double> r) {
  for (double v : r)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace detail

// Explicit leapfrog integration of the configured problem. Row n of the result
// is the solution at t = n*dt; row 0 is exactly the initial value.
inline StateHistory solve(const ProblemConfig& cfg) {
  detail::validate_problem(cfg);
  const GridSpec& g = cfg.grid;
  const std::size_t nx = g.nx, nt = g.nt;
  const double dt = g.dt, dt2 = dt * dt;
  const bool needs_phi = cfg.kind != ProblemKind::Full;
  const double force_scale = cfg.kind == ProblemKind::Full ? cfg.epsilon : 1.0;

  StateHistory h;
  h.grid = g;
  h.kind = cfg.kind;
  h.data.reserve(nt * nx);
  h.data.insert(h.data.end(), cfg.initial_value.values.begin(), cfg.initial_value.values.end());

  // Spatial forcing profile; the temporal part is a per-step scalar. Their sum
  // reproduces forcing_eval exactly.
  std::vector<double> force_x(nx, 0.0);
  const bool has_forcing = cfg.forcing.amp_x != 0.0 || cfg.forcing.amp_t != 0.0;
  if (has_forcing)
    for (std::size_t i = 0; i < nx; ++i)
      force_x[i] = cfg.forcing.amp_x *
                   std::cos(static_cast<double>(cfg.forcing.mode) * std::numbers::pi * g.x(i) /
                            cfg.forcing.half_length);
  auto force_t = [&](double t) {
    if (!has_forcing) return 0.0;
    return cfg.forcing.amp_t *
           std::cos(static_cast<double>(cfg.forcing.mode) * std::numbers::pi * t /
                    cfg.forcing.horizon);
  };

  auto phi_at = [&](double t) { return kink_field(g, t, cfg.soliton); };

  Field prev = cfg.initial_value;
  Field lap_prev = diff2_x(prev, cfg.boundary);

  // First step: Taylor expansion w^1 = w^0 + dt v0 + dt^2/2 * rhs(w^0, t=0).
  Field curr(g);
  {
    Field phi0 = needs_phi ? phi_at(0.0) : Field(g);
    const double ft0 = force_t(0.0);
    for (std::size_t i = 0; i < nx; ++i) {
      const double rhs = lap_prev.values[i] -
                         nonlinear_term(cfg.kind, phi0.values[i], prev.values[i], cfg.epsilon) +
                         force_scale * (force_x[i] + ft0);
      curr.values[i] = prev.values[i] + dt * cfg.initial_velocity.values[i] + 0.5 * dt2 * rhs;
    }
    if (cfg.boundary == BoundaryKind::Dirichlet) {
      curr.values[0] = prev.values[0];
      curr.values[nx - 1] = prev.values[nx - 1];
    }
  }
  if (nt > 1) {
    if (!detail::row_finite({curr.values.data(), nx})) throw BlowupError(1, std::move(h));
    h.data.insert(h.data.end(), curr.values.begin(), curr.values.end());
  }

  Field next(g);
  for (std::size_t n = 1; n + 1 < nt; ++n) {
    Field lap_curr = diff2_x(curr, cfg.boundary);
    Field phi_n = needs_phi ? phi_at(g.t(n)) : Field(g);
    const double ftn = force_t(g.t(n));
    for (std::size_t i = 0; i < nx; ++i) {
      const double rhs = lap_curr.values[i] -
                         nonlinear_term(cfg.kind, phi_n.values[i], curr.values[i], cfg.epsilon) +
                         force_scale * (force_x[i] + ftn);
      next.values[i] = 2.0 * curr.values[i] - prev.values[i] + dt2 * rhs +
                       cfg.damping * dt * (lap_curr.values[i] - lap_prev.values[i]);
    }
    if (cfg.boundary == BoundaryKind::Dirichlet) {
      next.values[0] = cfg.initial_value.values[0];
      next.values[nx - 1] = cfg.initial_value.values[nx - 1];
    }
    if (!detail::row_finite({next.values.data(), nx})) throw BlowupError(n + 1, std::move(h));
    h.data.insert(h.data.end(), next.values.begin(), next.values.end());
    prev = std::move(curr);
    curr = std::move(next);
    next = Field(g);
    lap_prev = std::move(lap_curr);
  }
  return h;
}

// u = phi + eps*eta, slice by slice. The result is a full-field history.
// eps = 0 is accepted here (returns the sampled kink); the solver config is
// where eps > 0 is enforced.
inline StateHistory reconstruct(const StateHistory& eta, const SolitonParams& p, double epsilon) {
  if (!(std::isfinite(epsilon) && epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("epsilon: must lie in [0, 1]");
  StateHistory u;
  u.grid = eta.grid;
  u.kind = ProblemKind::Full;
  u.data.resize(eta.data.size());
  const std::size_t nx = eta.grid.nx;
  for (std::size_t n = 0; n < eta.rows(); ++n) {
    const double t = eta.grid.t(n);
    for (std::size_t i = 0; i < nx; ++i)
      u.data[n * nx + i] = kink(eta.grid.x(i), t, p) + epsilon * eta.at(n, i);
  }
  return u;
}

}  // namespace sglab
