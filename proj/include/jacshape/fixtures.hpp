#pragma once

// Manufactured densities and maps.

#include <cmath>
#include <numbers>

#include "jacshape/field.hpp"
#include "jacshape/grid_map.hpp"

namespace jacshape {

/// 1D zero-mean bump on [lo, hi]: sin(2 pi s)(1 - cos(2 pi s))/2, s = (x-lo)/(hi-lo).
inline double bump_1d(double x, double lo = 0.3, double hi = 0.7) {
  if (x <= lo || x >= hi) return 0.0;
  const double s = 2 * std::numbers::pi * (x - lo) / (hi - lo);
  return std::sin(s) * (1 - std::cos(s)) / 2;
}

/// Radial profile (1-u)^4 (1-6u), u = |x-c|^2/R^2: zero mean on the disk of
/// radius R, value 1 at the centre.
inline double radial_profile(const Point& p, const Point& c, double radius) {
  const double u = ((p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1])) / (radius * radius);
  return u >= 1 ? 0.0 : std::pow(1 - u, 4) * (1 - 6 * u);
}

inline double radial_weight(const Point& p, const Point& c, double radius) {
  const double u = ((p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1])) / (radius * radius);
  return u >= 1 ? 0.0 : std::pow(1 - u, 4);
}

/// f = 1 + amplitude * g, with g made exactly zero-mean under the domain
/// quadrature by subtracting a multiple of `weight`.
template <class Shape, class Weight>
ScalarField zero_mean_density(DomainPtr d, double amplitude, Shape&& shape, Weight&& weight) {
  ScalarField g = ScalarField::sample(d, shape);
  const ScalarField w = ScalarField::sample(d, weight);
  const double iw = integrate(w);
  if (iw != 0.0) {
    const double k = integrate(g) / iw;
    for (std::size_t n : d->nodes) g.values[n] -= k * w.values[n];
  }
  ScalarField f = ScalarField::constant(d, 1.0, Fill::one);
  for (std::size_t n : d->nodes) f.values[n] = 1 + amplitude * g.values[n];
  return f;
}

/// 1 + amplitude * bump_1d on an interval domain.
inline ScalarField bump_density_1d(DomainPtr d, double amplitude, double lo = 0.3, double hi = 0.7) {
  ScalarField f = ScalarField::constant(d, 1.0, Fill::one);
  for (std::size_t n : d->nodes) f.values[n] = 1 + amplitude * bump_1d(d->grid.point(n)[0], lo, hi);
  return f;
}

/// 1 + amplitude * radial_profile, zero mean on the grid.
inline ScalarField radial_density(DomainPtr d, double amplitude, double radius, Point c = {0, 0}) {
  return zero_mean_density(
      d, amplitude, [&](const Point& p) { return radial_profile(p, c, radius); },
      [&](const Point& p) { return radial_weight(p, c, radius); });
}

/// Off-centre, non-radial variant: two opposite lobes plus a radial part.
inline ScalarField lobed_density(DomainPtr d, double amplitude, double radius, Point c = {0, 0}) {
  return zero_mean_density(
      d, amplitude,
      [&](const Point& p) {
        const double x = (p[0] - c[0]) / radius, y = (p[1] - c[1]) / radius;
        return radial_weight(p, c, radius) * (0.5 + x + 0.5 * y * y);
      },
      [&](const Point& p) { return radial_weight(p, c, radius); });
}

/// Radial squeeze psi(x) = x (1 + a s(|x|/R)) with s(q) = (1 - q^2)^4, the
/// identity outside |x| <= R. Its Jacobian determinant is analytic.
struct RadialSqueeze {
  double amplitude = 0.1;
  double radius = 0.5;

  double g(double r) const {
    const double q = r / radius;
    return q >= 1 ? 1.0 : 1 + amplitude * std::pow(1 - q * q, 4);
  }
  double dg(double r) const {
    const double q = r / radius;
    return q >= 1 ? 0.0 : amplitude * 4 * std::pow(1 - q * q, 3) * (-2 * q / radius);
  }
  Point operator()(const Point& p) const {
    const double s = g(norm(p));
    return {p[0] * s, p[1] * s};
  }
  /// det of x -> x g(|x|) is g (g + r g').
  double det(const Point& p) const {
    const double r = norm(p);
    return g(r) * (g(r) + r * dg(r));
  }
};

inline GridMap sample_map(DomainPtr d, const RadialSqueeze& psi, Interp interp = Interp::bicubic) {
  GridMap m{VectorField::zeros(d), interp};
  for (std::size_t n : d->nodes) {
    const Point x = d->grid.point(n);
    const Point y = psi(x);
    m.displacement.comp[0][n] = y[0] - x[0];
    m.displacement.comp[1][n] = y[1] - x[1];
  }
  return m;
}

}  // namespace jacshape
