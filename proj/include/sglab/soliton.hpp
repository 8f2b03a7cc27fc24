#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sglab/grid.hpp"

namespace sglab {

// Traveling kink parameters: velocity v in (-1, 1) and initial center x0.
struct SolitonParams {
  double velocity = 0.0;
  double center = 0.0;
};

inline double lorentz_gamma(double velocity) {
  if (!(std::isfinite(velocity) && std::fabs(velocity) < 1.0))
    throw std::domain_error("soliton.velocity: must satisfy |v| < 1");
  return 1.0 / std::sqrt(1.0 - velocity * velocity);
}

// Kink profile 4*atan(exp(s)), s = gamma*(x - v t - x0), with asymptotic
// expansions past |s| = 40 so the tails stay exact instead of saturating.
// The phase is evaluated as (x - x0) - v*t so that shifting x and zeroing x0
// commute bitwise (translation covariance is exact, not just approximate).
inline double kink(double x, double t, const SolitonParams& p) {
  const double g = lorentz_gamma(p.velocity);
  const double s = g * ((x - p.center) - p.velocity * t);
  if (s > 40.0) return 2.0 * std::numbers::pi - 4.0 * std::exp(-s);
  if (s < -40.0) return 4.0 * std::exp(s);
  return 4.0 * std::atan(std::exp(s));
}

// Exact time derivative of the kink: -2 gamma v / cosh(s).
inline double kink_dt(double x, double t, const SolitonParams& p) {
  const double g = lorentz_gamma(p.velocity);
  const double s = g * ((x - p.center) - p.velocity * t);
  if (std::fabs(s) > 700.0) return 0.0;  // cosh would overflow; limit is 0
  return -2.0 * g * p.velocity / std::cosh(s);
}

inline Field kink_field(const GridSpec& grid, double t, const SolitonParams& p) {
  return sample_field(grid, [&](double x) { return kink(x, t, p); });
}

inline Field kink_dt_field(const GridSpec& grid, double t, const SolitonParams& p) {
  return sample_field(grid, [&](double x) { return kink_dt(x, t, p); });
}

}  // namespace sglab
