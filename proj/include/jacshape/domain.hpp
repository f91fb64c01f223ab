#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "jacshape/error.hpp"
#include "jacshape/grid.hpp"
#include "jacshape/pgm.hpp"

namespace jacshape {

/// Shape of a computational domain. Parameters are interpreted per kind:
/// interval {a, b}; disk {cx, cy, radius}; rectangle {x0, y0, x1, y1};
/// mask_file uses `path`; subdomain is produced by exhaust().
struct ShapeDescriptor {
  enum class Kind { interval, disk, rectangle, mask_file, subdomain };
  Kind kind = Kind::disk;
  std::vector<double> params;
  std::string path;

  static ShapeDescriptor interval(double a, double b) { return {Kind::interval, {a, b}, {}}; }
  static ShapeDescriptor disk(Point c, double r) { return {Kind::disk, {c[0], c[1], r}, {}}; }
  static ShapeDescriptor rectangle(Point lo, Point hi) {
    return {Kind::rectangle, {lo[0], lo[1], hi[0], hi[1]}, {}};
  }
  static ShapeDescriptor unit_square() { return rectangle({0.0, 0.0}, {1.0, 1.0}); }
  static ShapeDescriptor mask(std::string path) { return {Kind::mask_file, {}, std::move(path)}; }
};

inline std::string to_string(ShapeDescriptor::Kind k) {
  switch (k) {
    case ShapeDescriptor::Kind::interval: return "interval";
    case ShapeDescriptor::Kind::disk: return "disk";
    case ShapeDescriptor::Kind::rectangle: return "rectangle";
    case ShapeDescriptor::Kind::mask_file: return "mask";
    case ShapeDescriptor::Kind::subdomain: return "subdomain";
  }
  return "unknown";
}

/// A bounded connected domain sampled on a uniform grid. Immutable once built;
/// shared between fields through DomainPtr.
struct Domain {
  Grid grid;
  ShapeDescriptor shape;
  int resolution = 0;
  std::vector<std::uint8_t> mask;  // 1 inside
  std::vector<double> sdist;       // negative exactly on in-mask nodes
  std::vector<double> weights;     // quadrature weights (area units), zero off-mask
  std::vector<std::size_t> nodes;  // in-mask node indices, ascending
  int boundary_components = 1;
  std::vector<std::string> warnings;

  int dim() const { return grid.dim; }
  double h() const { return grid.h; }
  bool inside(std::size_t n) const { return mask[n] != 0; }
  bool inside(int i, int j) const { return grid.contains(i, j) && mask[grid.index(i, j)] != 0; }

  /// Discrete measure of the domain: sum of the quadrature weights.
  double measure() const {
    double m = 0.0;
    for (std::size_t n : nodes) m += weights[n];
    return m;
  }
};

using DomainPtr = std::shared_ptr<const Domain>;

namespace detail {

// Exact squared Euclidean distance transform of a 1D sampled function
// (lower envelope of parabolas).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    if (!std::isfinite(f[v[k]])) {
      v[k] = q;
      continue;
    }
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (k > 0 && s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = std::isfinite(f[v[k]]) ? dq * dq + f[v[k]] : std::numeric_limits<double>::infinity();
  }
}

// Squared distance (in node units) from every node of a w x h raster to the
// nearest site; two separable passes (columns, then rows).
inline std::vector<double> edt_2d(const std::vector<std::uint8_t>& site, int w, int h) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> out(site.size());
  for (std::size_t k = 0; k < site.size(); ++k) out[k] = site[k] ? 0.0 : inf;
  std::vector<double> f(h), d(h);
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < h; ++j) f[j] = out[static_cast<std::size_t>(j) * w + i];
    edt_1d(f, d);
    for (int j = 0; j < h; ++j) out[static_cast<std::size_t>(j) * w + i] = d[j];
  }
  f.resize(w);
  d.resize(w);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) f[i] = out[static_cast<std::size_t>(j) * w + i];
    edt_1d(f, d);
    for (int i = 0; i < w; ++i) out[static_cast<std::size_t>(j) * w + i] = d[i];
  }
  return out;
}

// Number of 4-connected components among nodes with sel != 0.
inline int count_components(const std::vector<std::uint8_t>& sel, int w, int h, bool eight) {
  std::vector<int> label(sel.size(), -1);
  int count = 0;
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < sel.size(); ++s) {
    if (!sel[s] || label[s] >= 0) continue;
    label[s] = count;
    queue.push_back(s);
    while (!queue.empty()) {
      const std::size_t n = queue.front();
      queue.pop_front();
      const int i = static_cast<int>(n % w), j = static_cast<int>(n / w);
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if ((di == 0 && dj == 0) || (!eight && di != 0 && dj != 0)) continue;
          const int a = i + di, b = j + dj;
          if (a < 0 || a >= w || b < 0 || b >= h) continue;
          const std::size_t m = static_cast<std::size_t>(b) * w + a;
          if (sel[m] && label[m] < 0) {
            label[m] = count;
            queue.push_back(m);
          }
        }
    }
    ++count;
  }
  return count;
}

using NormalFn = std::function<Point(const Point&)>;

// Fraction of each node cell inside the domain, estimated from the signed
// distance and the boundary normal; fractions of off-mask cells are handed to
// their in-mask neighbours so that the weights live on the mask only.
inline std::vector<double> quadrature_weights(const Grid& g, const std::vector<std::uint8_t>& mask,
                                              const std::vector<double>& sdist,
                                              const NormalFn& normal) {
  const double cell = g.dim == 1 ? g.h : g.h * g.h;
  std::vector<double> frac(g.size(), 0.0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double s = sdist[n];
    if (s <= -g.h || s >= g.h) {
      frac[n] = s < 0 ? 1.0 : 0.0;
      continue;
    }
    double width = g.h;
    if (g.dim == 2) {
      Point nv;
      if (normal) {
        nv = normal(g.point(n));
      } else {
        const int i = g.col(n), j = g.row(n);
        auto sd = [&](int a, int b) {
          a = std::clamp(a, 0, g.nx - 1);
          b = std::clamp(b, 0, g.ny - 1);
          return sdist[g.index(a, b)];
        };
        nv = {sd(i + 1, j) - sd(i - 1, j), sd(i, j + 1) - sd(i, j - 1)};
      }
      const double len = norm(nv);
      if (len > 0) width = g.h * (std::abs(nv[0]) + std::abs(nv[1])) / len;
    }
    frac[n] = std::clamp(0.5 - s / width, 0.0, 1.0);
  }
  std::vector<double> w(g.size(), 0.0);
  for (std::size_t n = 0; n < g.size(); ++n)
    if (mask[n]) w[n] += frac[n] * cell;
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (mask[n] || frac[n] <= 0.0) continue;
    const int i = g.col(n), j = g.row(n);
    for (bool diag : {false, true}) {
      std::vector<std::size_t> recv;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          if ((di != 0 && dj != 0) != diag) continue;
          if (g.dim == 1 && dj != 0) continue;
          if (g.contains(i + di, j + dj) && mask[g.index(i + di, j + dj)])
            recv.push_back(g.index(i + di, j + dj));
        }
      if (recv.empty()) continue;
      for (std::size_t m : recv) w[m] += frac[n] * cell / static_cast<double>(recv.size());
      break;
    }
  }
  return w;
}

inline std::shared_ptr<Domain> finalize_domain(Grid g, ShapeDescriptor shape, int resolution,
                                               std::vector<double> sdist, const NormalFn& normal,
                                               ErrorKind empty_kind, ErrorKind disconnected_kind) {
  auto d = std::make_shared<Domain>();
  d->grid = g;
  d->shape = std::move(shape);
  d->resolution = resolution;
  d->sdist = std::move(sdist);
  d->mask.assign(g.size(), 0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (d->sdist[n] < 0) {
      d->mask[n] = 1;
      d->nodes.push_back(n);
    }
  }
  if (d->nodes.empty()) fail(empty_kind, "domain mask is empty");
  if (g.dim == 2) {
    if (count_components(d->mask, g.nx, g.ny, false) != 1)
      fail(disconnected_kind, "domain mask is not 4-connected");
    // Complement on a grid padded by one node; 8-connectivity is the dual of
    // the 4-connectivity used for the mask.
    const int pw = g.nx + 2, ph = g.ny + 2;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(pw) * ph, 1);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        out[static_cast<std::size_t>(j + 1) * pw + i + 1] = d->mask[g.index(i, j)] ? 0 : 1;
    d->boundary_components = count_components(out, pw, ph, true);
    if (d->boundary_components > 1)
      d->warnings.push_back("domain boundary has " + std::to_string(d->boundary_components) +
                            " components; collar-supported solves require a single component");
  } else {
    d->boundary_components = 2;  // two endpoints
  }
  d->weights = quadrature_weights(g, d->mask, d->sdist, normal);
  return d;
}

inline double rectangle_sdist(const Point& p, const std::vector<double>& r) {
  const double cx = 0.5 * (r[0] + r[2]), cy = 0.5 * (r[1] + r[3]);
  const double qx = std::abs(p[0] - cx) - 0.5 * (r[2] - r[0]);
  const double qy = std::abs(p[1] - cy) - 0.5 * (r[3] - r[1]);
  const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
  return outside + std::min(std::max(qx, qy), 0.0);
}

inline Point rectangle_normal(const Point& p, const std::vector<double>& r) {
  const double cx = 0.5 * (r[0] + r[2]), cy = 0.5 * (r[1] + r[3]);
  const double qx = std::abs(p[0] - cx) - 0.5 * (r[2] - r[0]);
  const double qy = std::abs(p[1] - cy) - 0.5 * (r[3] - r[1]);
  const double sx = p[0] >= cx ? 1.0 : -1.0, sy = p[1] >= cy ? 1.0 : -1.0;
  if (qx > 0 && qy > 0) return {sx * qx, sy * qy};
  return qx >= qy ? Point{sx, 0.0} : Point{0.0, sy};
}

}  // namespace detail

/// Builds the sampled domain. `resolution` is the number of nodes per unit
/// length (h = 1/resolution, rounded so the bounding box is covered by whole
/// cells). For mask files each pixel is one node of size 1/resolution; a
/// resolution of 0 selects 1/max(width, height).
inline DomainPtr build_domain(const ShapeDescriptor& shape, int resolution) {
  using Kind = ShapeDescriptor::Kind;
  if (shape.kind != Kind::mask_file && resolution < 16)
    fail(ErrorKind::underresolved, "resolution must be at least 16");
  Grid g;
  std::vector<double> sd;
  detail::NormalFn normal;
  switch (shape.kind) {
    case Kind::interval: {
      const double a = shape.params.at(0), b = shape.params.at(1);
      if (!(b > a)) fail(ErrorKind::invalid_argument, "interval requires a < b");
      g.dim = 1;
      g.nx = std::max(1, static_cast<int>(std::lround((b - a) * resolution)));
      g.ny = 1;
      g.h = (b - a) / g.nx;
      g.x0 = a + 0.5 * g.h;
      if (g.nx < 16) fail(ErrorKind::underresolved, "interval needs at least 16 nodes");
      sd.resize(g.size());
      for (int i = 0; i < g.nx; ++i) sd[i] = std::max(a - g.x(i), g.x(i) - b);
      break;
    }
    case Kind::disk: {
      const Point c{shape.params.at(0), shape.params.at(1)};
      const double r = shape.params.at(2);
      if (!(r > 0)) fail(ErrorKind::invalid_argument, "disk radius must be positive");
      g.nx = g.ny = std::max(1, static_cast<int>(std::lround(2 * r * resolution)));
      g.h = 2 * r / g.nx;
      g.x0 = c[0] - r + 0.5 * g.h;
      g.y0 = c[1] - r + 0.5 * g.h;
      if (g.nx < 16) fail(ErrorKind::underresolved, "disk needs at least 16 nodes across");
      sd.resize(g.size());
      for (std::size_t n = 0; n < g.size(); ++n) {
        const Point p = g.point(n);
        sd[n] = std::hypot(p[0] - c[0], p[1] - c[1]) - r;
      }
      normal = [c](const Point& p) { return Point{p[0] - c[0], p[1] - c[1]}; };
      break;
    }
    case Kind::rectangle: {
      const auto& r = shape.params;
      if (r.size() != 4 || !(r[2] > r[0]) || !(r[3] > r[1]))
        fail(ErrorKind::invalid_argument, "rectangle requires x0 < x1 and y0 < y1");
      g.nx = std::max(1, static_cast<int>(std::lround((r[2] - r[0]) * resolution)));
      g.h = (r[2] - r[0]) / g.nx;
      const double ny = (r[3] - r[1]) / g.h;
      g.ny = static_cast<int>(std::lround(ny));
      if (std::abs(ny - g.ny) > 1e-9 * ny)
        fail(ErrorKind::invalid_argument, "rectangle sides must be commensurate with the grid");
      g.x0 = r[0] + 0.5 * g.h;
      g.y0 = r[1] + 0.5 * g.h;
      if (std::min(g.nx, g.ny) < 16) fail(ErrorKind::underresolved, "rectangle needs 16 nodes per side");
      sd.resize(g.size());
      for (std::size_t n = 0; n < g.size(); ++n) sd[n] = detail::rectangle_sdist(g.point(n), r);
      normal = [r](const Point& p) { return detail::rectangle_normal(p, r); };
      break;
    }
    case Kind::mask_file: {
      const GrayImage img = read_pgm(shape.path);
      if (std::min(img.width, img.height) < 16)
        fail(ErrorKind::underresolved, "mask image must be at least 16x16");
      g.nx = img.width;
      g.ny = img.height;
      g.h = 1.0 / (resolution > 0 ? resolution : std::max(img.width, img.height));
      g.x0 = g.y0 = 0.5 * g.h;
      // Padded raster: one ring of outside pixels around the image.
      const int pw = g.nx + 2, ph = g.ny + 2;
      std::vector<std::uint8_t> in(static_cast<std::size_t>(pw) * ph, 0), out(in.size(), 1);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          // image row 0 is the top edge (largest y)
          const bool v = img.pixels[static_cast<std::size_t>(g.ny - 1 - j) * g.nx + i] > 127;
          in[static_cast<std::size_t>(j + 1) * pw + i + 1] = v;
          out[static_cast<std::size_t>(j + 1) * pw + i + 1] = !v;
        }
      const auto d_out = detail::edt_2d(out, pw, ph);
      const auto d_in = detail::edt_2d(in, pw, ph);
      sd.resize(g.size());
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t p = static_cast<std::size_t>(j + 1) * pw + i + 1;
          sd[g.index(i, j)] = in[p] ? -(std::sqrt(d_out[p]) - 0.5) * g.h
                                    : (std::sqrt(d_in[p]) - 0.5) * g.h;
        }
      break;
    }
    case Kind::subdomain:
      fail(ErrorKind::invalid_argument, "subdomains are produced by exhaust()");
  }
  return detail::finalize_domain(g, shape, resolution, std::move(sd), normal,
                                 ErrorKind::degenerate_domain, ErrorKind::connectivity);
}

/// Largest depth of an in-mask node below the boundary.
inline double inradius(const Domain& d) {
  double r = 0.0;
  for (std::size_t n : d.nodes) r = std::max(r, -d.sdist[n]);
  return r;
}

/// Metric collar band {x in mask : -epsilon <= sdist(x)}.
struct CollarSpec {
  DomainPtr domain;
  double epsilon = 0.0;
  std::vector<std::uint8_t> in_band;        // per grid node
  std::vector<std::size_t> band;            // ascending node indices
  std::vector<std::size_t> inner_boundary;  // band nodes next to non-band mask nodes
  double thickness = 0.0;

  bool contains(std::size_t n) const { return in_band[n] != 0; }
};

inline CollarSpec collar(DomainPtr domain, double epsilon) {
  if (!(epsilon > 0)) fail(ErrorKind::invalid_argument, "collar thickness must be positive");
  const double r = inradius(*domain);
  if (epsilon >= r)
    fail(ErrorKind::collar_too_thick,
         "collar thickness " + std::to_string(epsilon) + " >= inradius " + std::to_string(r));
  const Grid& g = domain->grid;
  CollarSpec c;
  c.epsilon = epsilon;
  c.in_band.assign(g.size(), 0);
  for (std::size_t n : domain->nodes) {
    if (domain->sdist[n] >= -epsilon) {
      c.in_band[n] = 1;
      c.band.push_back(n);
      c.thickness = std::max(c.thickness, -domain->sdist[n]);
    }
  }
  for (std::size_t n : c.band) {
    const int i = g.col(n), j = g.row(n);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < (g.dim == 1 ? 2 : 4); ++k) {
      if (domain->inside(i + di[k], j + dj[k]) && !c.in_band[g.index(i + di[k], j + dj[k])]) {
        c.inner_boundary.push_back(n);
        break;
      }
    }
  }
  c.domain = std::move(domain);
  return c;
}

/// Inner parallel subdomain {sdist < -d/2} on the same grid.
inline DomainPtr exhaust(const DomainPtr& domain, double d) {
  if (!(d > 0)) fail(ErrorKind::invalid_argument, "exhaustion distance must be positive");
  if (d >= inradius(*domain))
    fail(ErrorKind::exhaustion_failure, "exhaustion distance exceeds the inradius");
  std::vector<double> sd(domain->sdist);
  for (double& s : sd) s += 0.5 * d;
  ShapeDescriptor shape{ShapeDescriptor::Kind::subdomain, {d}, {}};
  if (domain->shape.kind == ShapeDescriptor::Kind::subdomain)
    shape.params.insert(shape.params.end(), domain->shape.params.begin(), domain->shape.params.end());
  detail::NormalFn normal;
  if (domain->shape.kind == ShapeDescriptor::Kind::disk) {
    const Point c{domain->shape.params[0], domain->shape.params[1]};
    normal = [c](const Point& p) { return Point{p[0] - c[0], p[1] - c[1]}; };
  }
  auto sub = detail::finalize_domain(domain->grid, shape, domain->resolution, std::move(sd), normal,
                                     ErrorKind::exhaustion_failure, ErrorKind::exhaustion_failure);
  return sub;
}

}  // namespace jacshape
