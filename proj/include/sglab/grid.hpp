#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sglab {

enum class BoundaryKind { Dirichlet, Neumann };

// Uniform space-time lattice on [-L, L] x [0, T].
// dx = 2L/(nx-1); dt = cfl*dx; nt = ceil(T/dt)+1 so that (nt-1)*dt >= T.
struct GridSpec {
  double half_length = 0.0;  // L
  double horizon = 0.0;      // T
  double cfl = 0.0;
  double dx = 0.0;
  double dt = 0.0;
  std::size_t nx = 0;
  std::size_t nt = 0;

  double x(std::size_t i) const { return -half_length + dx * static_cast<double>(i); }
  double t(std::size_t n) const { return dt * static_cast<double>(n); }

  std::vector<double> x_points() const {
    std::vector<double> xs(nx);
    for (std::size_t i = 0; i < nx; ++i) xs[i] = x(i);
    return xs;
  }

  bool operator==(const GridSpec&) const = default;
};

inline GridSpec make_grid(double half_length, std::size_t nx, double horizon, double cfl) {
  auto bad = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("grid." + field + ": " + why);
  };
  if (!(std::isfinite(half_length) && half_length > 0.0)) bad("half_length", "must be finite and > 0");
  if (nx < 3) bad("points", "must be >= 3");
  if (!(std::isfinite(horizon) && horizon > 0.0)) bad("horizon", "must be finite and > 0");
  if (!(std::isfinite(cfl) && cfl > 0.0 && cfl < 1.0)) bad("cfl", "must lie in (0, 1)");

  GridSpec g;
  g.half_length = half_length;
  g.horizon = horizon;
  g.cfl = cfl;
  g.nx = nx;
  g.dx = 2.0 * half_length / static_cast<double>(nx - 1);
  g.dt = cfl * g.dx;
  // Tiny relative slack so T/dt landing on an integer (up to roundoff) does not
  // add a spurious extra step.
  double steps = horizon / g.dt;
  g.nt = static_cast<std::size_t>(std::ceil(steps * (1.0 - 1e-12))) + 1;
  return g;
}

// A spatial slice: one value per grid point.
struct Field {
  GridSpec grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(const GridSpec& g) : grid(g), values(g.nx, 0.0) {}
  Field(const GridSpec& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.nx)
      throw std::invalid_argument("field: value count does not match grid points");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

template <typename F>
Field sample_field(const GridSpec& g, F&& fn) {
  Field out(g);
  for (std::size_t i = 0; i < g.nx; ++i) out.values[i] = fn(g.x(i));
  return out;
}

namespace detail {
inline void require_same_grid(const Field& a, const Field& b, const char* op) {
  if (!(a.grid == b.grid))
    throw std::invalid_argument(std::string(op) + ": fields live on different grids");
}
}  // namespace detail

// Second spatial difference. Neumann ends use mirror ghosts (f[-1] = f[1],
// f[nx] = f[nx-2]); Dirichlet ends are zeroed (boundary rows are pinned by the
// solver, not evolved).
inline Field diff2_x(const Field& f, BoundaryKind bc) {
  const std::size_t n = f.size();
  if (n < 3) throw std::invalid_argument("diff2_x: need at least 3 points");
  const double inv_dx2 = 1.0 / (f.grid.dx * f.grid.dx);
  Field out(f.grid);
  for (std::size_t i = 1; i + 1 < n; ++i)
    out.values[i] = (f.values[i - 1] - 2.0 * f.values[i] + f.values[i + 1]) * inv_dx2;
  if (bc == BoundaryKind::Neumann) {
    out.values[0] = 2.0 * (f.values[1] - f.values[0]) * inv_dx2;
    out.values[n - 1] = 2.0 * (f.values[n - 2] - f.values[n - 1]) * inv_dx2;
  } else {
    out.values[0] = 0.0;
    out.values[n - 1] = 0.0;
  }
  return out;
}

// First spatial difference: centered in the interior, second-order one-sided
// at the ends.
inline Field diff1_x(const Field& f) {
  const std::size_t n = f.size();
  if (n < 3) throw std::invalid_argument("diff1_x: need at least 3 points");
  const double inv_2dx = 0.5 / f.grid.dx;
  Field out(f.grid);
  for (std::size_t i = 1; i + 1 < n; ++i)
    out.values[i] = (f.values[i + 1] - f.values[i - 1]) * inv_2dx;
  out.values[0] = (-3.0 * f.values[0] + 4.0 * f.values[1] - f.values[2]) * inv_2dx;
  out.values[n - 1] = (3.0 * f.values[n - 1] - 4.0 * f.values[n - 2] + f.values[n - 3]) * inv_2dx;
  return out;
}

// Trapezoid-rule L2 inner product on [-L, L].
inline double l2_inner(const Field& a, const Field& b) {
  detail::require_same_grid(a, b, "l2_inner");
  const std::size_t n = a.size();
  double acc = 0.5 * (a.values[0] * b.values[0] + a.values[n - 1] * b.values[n - 1]);
  for (std::size_t i = 1; i + 1 < n; ++i) acc += a.values[i] * b.values[i];
  return acc * a.grid.dx;
}

inline double l2_norm_sq(const Field& f) { return l2_inner(f, f); }

// Squared H1 norm: ||f||^2 + ||f_x||^2 with f_x from diff1_x.
inline double h1_norm_sq(const Field& f) {
  Field fx = diff1_x(f);
  return l2_inner(f, f) + l2_inner(fx, fx);
}

}  // namespace sglab
