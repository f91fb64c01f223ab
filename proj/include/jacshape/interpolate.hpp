#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "jacshape/grid.hpp"

namespace jacshape {

enum class Interp { bilinear, bicubic };

/// Interpolated value and its spatial gradient.
struct Sample {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

namespace detail {

struct AxisStencil {
  int first = 0;  // index of the leftmost node used
  int count = 0;
  std::array<double, 4> w{};
  std::array<double, 4> dw{};  // derivative weights, per unit length
};

inline AxisStencil axis_stencil(double s, double h, Interp interp) {
  // Snap coordinates that land on a node up to rounding, so nodal values are
  // reproduced bit-exactly.
  const double r = std::round(s);
  if (std::abs(s - r) < 1e-9) s = r;
  const double base = std::floor(s);
  const double t = s - base;
  AxisStencil a;
  if (interp == Interp::bilinear) {
    a.first = static_cast<int>(base);
    a.count = 2;
    a.w = {1 - t, t, 0, 0};
    a.dw = {-1 / h, 1 / h, 0, 0};
    return a;
  }
  // Catmull-Rom cubic convolution.
  const double t2 = t * t, t3 = t2 * t;
  a.first = static_cast<int>(base) - 1;
  a.count = 4;
  a.w = {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t),
         0.5 * (t3 - t2)};
  a.dw = {0.5 * (-3 * t2 + 4 * t - 1) / h, 0.5 * (9 * t2 - 10 * t) / h,
          0.5 * (-9 * t2 + 8 * t + 1) / h, 0.5 * (3 * t2 - 2 * t) / h};
  return a;
}

}  // namespace detail

/// Interpolates node values at an arbitrary point. Nodes beyond the grid take
/// `fill`.
inline Sample interpolate(const Grid& g, const std::vector<double>& v, double fill, const Point& p,
                          Interp interp) {
  const detail::AxisStencil ax = detail::axis_stencil((p[0] - g.x0) / g.h, g.h, interp);
  auto at = [&](int i, int j) { return g.contains(i, j) ? v[g.index(i, j)] : fill; };
  Sample s;
  if (g.dim == 1) {
    for (int a = 0; a < ax.count; ++a) {
      if (ax.w[a] == 0.0 && ax.dw[a] == 0.0) continue;
      const double val = at(ax.first + a, 0);
      s.value += ax.w[a] * val;
      s.dx += ax.dw[a] * val;
    }
    return s;
  }
  const detail::AxisStencil ay = detail::axis_stencil((p[1] - g.y0) / g.h, g.h, interp);
  for (int b = 0; b < ay.count; ++b) {
    double row = 0.0, drow = 0.0;
    for (int a = 0; a < ax.count; ++a) {
      if (ax.w[a] == 0.0 && ax.dw[a] == 0.0) continue;
      const double val = at(ax.first + a, ay.first + b);
      row += ax.w[a] * val;
      drow += ax.dw[a] * val;
    }
    s.value += ay.w[b] * row;
    s.dx += ay.w[b] * drow;
    s.dy += ay.dw[b] * row;
  }
  return s;
}

}  // namespace jacshape
