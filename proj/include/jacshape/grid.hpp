#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace jacshape {

using Point = std::array<double, 2>;

/// Uniform cell-centered tensor grid. Node (i, j) sits at
/// (x0 + i*h, y0 + j*h); in 1D ny == 1 and the y coordinate is unused.
struct Grid {
  int dim = 2;
  int nx = 0;
  int ny = 1;
  double x0 = 0.0;
  double y0 = 0.0;
  double h = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  int col(std::size_t n) const { return static_cast<int>(n % static_cast<std::size_t>(nx)); }
  int row(std::size_t n) const { return static_cast<int>(n / static_cast<std::size_t>(nx)); }
  bool contains(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }

  double x(int i) const { return x0 + i * h; }
  double y(int j) const { return dim == 1 ? 0.0 : y0 + j * h; }
  Point point(std::size_t n) const { return {x(col(n)), y(row(n))}; }

  /// Closed bounding box covered by the node cells: [lo, hi] per axis.
  Point lower() const { return {x0 - 0.5 * h, dim == 1 ? 0.0 : y0 - 0.5 * h}; }
  Point upper() const {
    return {x0 + (nx - 0.5) * h, dim == 1 ? 0.0 : y0 + (ny - 0.5) * h};
  }

  bool same_as(const Grid& o) const {
    return dim == o.dim && nx == o.nx && ny == o.ny && x0 == o.x0 && y0 == o.y0 && h == o.h;
  }
};

inline double norm(const Point& p) { return std::hypot(p[0], p[1]); }

}  // namespace jacshape
