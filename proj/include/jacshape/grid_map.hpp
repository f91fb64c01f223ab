#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "jacshape/domain.hpp"
#include "jacshape/error.hpp"
#include "jacshape/field.hpp"
#include "jacshape/interpolate.hpp"

namespace jacshape {

/// Discrete map x -> x + displacement(x). Off-mask nodes carry zero
/// displacement, so the map is the identity outside the domain.
struct GridMap {
  VectorField displacement;
  Interp interp = Interp::bicubic;

  const DomainPtr& domain() const { return displacement.domain; }
  const Grid& grid() const { return displacement.domain->grid; }
  int dim() const { return displacement.dim(); }

  static GridMap identity(DomainPtr d, Interp interp = Interp::bicubic) {
    return GridMap{VectorField::zeros(std::move(d)), interp};
  }

  /// Image of node n.
  Point node_image(std::size_t n) const {
    Point p = grid().point(n);
    p[0] += displacement.comp[0][n];
    if (dim() == 2) p[1] += displacement.comp[1][n];
    return p;
  }
};

/// Image point with the Jacobian of the interpolated map.
struct MapSample {
  Point value{};
  double j[2][2] = {{1, 0}, {0, 1}};
  double det() const { return j[0][0] * j[1][1] - j[0][1] * j[1][0]; }
};

namespace detail {

inline bool in_box(const Grid& g, const Point& p, double slack) {
  const Point lo = g.lower(), hi = g.upper();
  if (p[0] < lo[0] - slack || p[0] > hi[0] + slack) return false;
  if (g.dim == 2 && (p[1] < lo[1] - slack || p[1] > hi[1] + slack)) return false;
  return true;
}

inline Point clamp_to_box(const Grid& g, Point p) {
  const Point lo = g.lower(), hi = g.upper();
  p[0] = std::clamp(p[0], lo[0], hi[0]);
  if (g.dim == 2) p[1] = std::clamp(p[1], lo[1], hi[1]);
  return p;
}

inline MapSample sample_map(const GridMap& phi, const Point& p) {
  MapSample s;
  const Grid& g = phi.grid();
  const Sample a = interpolate(g, phi.displacement.comp[0], 0.0, p, phi.interp);
  s.value = {p[0] + a.value, p[1]};
  s.j[0][0] = 1 + a.dx;
  if (g.dim == 1) {
    s.j[1][1] = 1;
    return s;
  }
  s.j[0][1] = a.dy;
  const Sample b = interpolate(g, phi.displacement.comp[1], 0.0, p, phi.interp);
  s.value[1] = p[1] + b.value;
  s.j[1][0] = b.dx;
  s.j[1][1] = 1 + b.dy;
  return s;
}

}  // namespace detail

/// Determinant of the finite-difference Jacobian at each in-mask node
/// (central differences; one-sided at the mask edge). Off-mask nodes are 1.
inline ScalarField jacobian_det(const GridMap& phi) {
  const VectorField& d = phi.displacement;
  const Domain& dom = *d.domain;
  ScalarField out = ScalarField::constant(d.domain, 1.0, Fill::one);
  for (std::size_t n : dom.nodes) {
    if (dom.dim() == 1) {
      out.values[n] = 1 + detail::axis_derivative(dom, d.comp[0], n, 0);
      continue;
    }
    const double a = 1 + detail::axis_derivative(dom, d.comp[0], n, 0);
    const double b = detail::axis_derivative(dom, d.comp[0], n, 1);
    const double c = detail::axis_derivative(dom, d.comp[1], n, 0);
    const double e = 1 + detail::axis_derivative(dom, d.comp[1], n, 1);
    out.values[n] = a * e - b * c;
  }
  return out;
}

/// Evaluates the interpolated map at arbitrary points inside the bounding box.
inline std::vector<Point> eval_map(const GridMap& phi, const std::vector<Point>& points) {
  std::vector<Point> out;
  out.reserve(points.size());
  const double slack = 1e-12 * (1 + phi.grid().h * std::max(phi.grid().nx, phi.grid().ny));
  for (const Point& p : points) {
    if (!detail::in_box(phi.grid(), p, slack))
      fail(ErrorKind::out_of_range, "evaluation point outside the bounding box");
    out.push_back(detail::sample_map(phi, p).value);
  }
  return out;
}

/// phi2 o phi1, sampled at the nodes. Nodes that phi1 fixes read phi2's nodal
/// displacement exactly.
inline GridMap compose(const GridMap& phi2, const GridMap& phi1) {
  if (!phi1.grid().same_as(phi2.grid()) || phi1.domain()->mask != phi2.domain()->mask)
    fail(ErrorKind::shape_mismatch, "composed maps live on different domains");
  GridMap out{VectorField::zeros(phi1.domain()), phi2.interp};
  const Grid& g = phi1.grid();
  for (std::size_t n : phi1.domain()->nodes) {
    const Point y = detail::clamp_to_box(g, phi1.node_image(n));
    const Point z = detail::sample_map(phi2, y).value;
    const Point x = g.point(n);
    out.displacement.comp[0][n] = z[0] - x[0];
    if (g.dim == 2) out.displacement.comp[1][n] = z[1] - x[1];
  }
  const ScalarField det = jacobian_det(out);
  Error e(ErrorKind::orientation_loss, "composed map has a non-positive Jacobian determinant");
  for (std::size_t n : out.domain()->nodes)
    if (!(det.values[n] > 0)) e.nodes.push_back(n);
  if (!e.nodes.empty()) throw e;
  return out;
}

struct InvertOptions {
  int max_iter = 50;
  int max_halvings = 30;
  double rel_tol = 1e-10;  // residual tolerance relative to the bounding-box diameter
};

/// Node-wise Newton inversion: finds x with phi(x) = node, seeded by the node
/// itself and then by already-solved neighbours.
inline GridMap invert(const GridMap& phi, const InvertOptions& opt = {}) {
  const Grid& g = phi.grid();
  const Domain& dom = *phi.domain();
  const Point lo = g.lower(), hi = g.upper();
  const double diam = std::hypot(hi[0] - lo[0], g.dim == 2 ? hi[1] - lo[1] : 0.0);
  const double tol = opt.rel_tol * diam;
  GridMap out{VectorField::zeros(phi.domain()), phi.interp};
  std::vector<std::uint8_t> solved(g.size(), 0);
  std::vector<Point> pre(g.size());

  auto residual = [&](const Point& x, const Point& y, MapSample& s) {
    s = detail::sample_map(phi, x);
    return Point{s.value[0] - y[0], g.dim == 2 ? s.value[1] - y[1] : 0.0};
  };
  auto newton = [&](Point x, const Point& y, Point& result) {
    MapSample s;
    Point r = residual(x, y, s);
    double rn = norm(r);
    for (int it = 0; it < opt.max_iter && rn > tol; ++it) {
      const double det = s.det();
      if (!(std::abs(det) > 0)) return false;
      const Point step{(s.j[1][1] * r[0] - s.j[0][1] * r[1]) / det, (-s.j[1][0] * r[0] + s.j[0][0] * r[1]) / det};
      double lambda = 1.0;
      bool improved = false;
      for (int k = 0; k <= opt.max_halvings; ++k, lambda *= 0.5) {
        const Point xt = detail::clamp_to_box(g, {x[0] - lambda * step[0], x[1] - lambda * step[1]});
        MapSample st;
        const Point rt = residual(xt, y, st);
        const double rtn = norm(rt);
        if (rtn < rn) {
          x = xt;
          r = rt;
          rn = rtn;
          s = st;
          improved = true;
          break;
        }
      }
      if (!improved) return false;
    }
    result = x;
    return rn <= tol;
  };

  std::vector<std::size_t> failed;
  for (std::size_t n : dom.nodes) {
    const Point y = g.point(n);
    Point x;
    bool ok = newton(y, y, x);
    const int i = g.col(n), j = g.row(n);
    for (int dj = -1; dj <= 1 && !ok; ++dj)
      for (int di = -1; di <= 1 && !ok; ++di) {
        if (!g.contains(i + di, j + dj)) continue;
        const std::size_t m = g.index(i + di, j + dj);
        if (!solved[m]) continue;
        const Point q = g.point(m);
        ok = newton(detail::clamp_to_box(g, {pre[m][0] + y[0] - q[0], pre[m][1] + y[1] - q[1]}), y, x);
      }
    if (!ok) {
      failed.push_back(n);
      continue;
    }
    solved[n] = 1;
    pre[n] = x;
    out.displacement.comp[0][n] = x[0] - y[0];
    if (g.dim == 2) out.displacement.comp[1][n] = x[1] - y[1];
  }
  if (!failed.empty()) {
    Error e(ErrorKind::inversion_failure,
            "Newton inversion failed at " + std::to_string(failed.size()) + " node(s)");
    e.nodes = std::move(failed);
    throw e;
  }
  return out;
}

/// max |displacement| over the given nodes.
inline double displacement_max(const GridMap& phi, std::span<const std::size_t> nodes) {
  return max_abs(phi.displacement, nodes);
}

}  // namespace jacshape
