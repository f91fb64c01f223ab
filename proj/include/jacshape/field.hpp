#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "jacshape/domain.hpp"
#include "jacshape/error.hpp"
#include "jacshape/grid.hpp"

namespace jacshape {

/// Value carried by off-mask nodes: density-like fields extend by one,
/// everything else by zero.
enum class Fill { one, zero };

inline double fill_value(Fill f) { return f == Fill::one ? 1.0 : 0.0; }

/// Samples of a real function on the grid of a domain.
struct ScalarField {
  DomainPtr domain;
  std::vector<double> values;
  Fill fill = Fill::zero;

  const Grid& grid() const { return domain->grid; }
  double operator[](std::size_t n) const { return values[n]; }
  double& operator[](std::size_t n) { return values[n]; }

  static ScalarField constant(DomainPtr d, double c, Fill fill = Fill::zero) {
    ScalarField f{d, std::vector<double>(d->grid.size(), fill_value(fill)), fill};
    for (std::size_t n : d->nodes) f.values[n] = c;
    return f;
  }

  /// Evaluates fn at every in-mask node; off-mask nodes carry the fill value.
  template <class Fn>
  static ScalarField sample(DomainPtr d, Fn&& fn, Fill fill = Fill::zero) {
    ScalarField f{d, std::vector<double>(d->grid.size(), fill_value(fill)), fill};
    for (std::size_t n : d->nodes) f.values[n] = fn(d->grid.point(n));
    return f;
  }
};

/// Samples of an R^dim-valued field; one array per component.
struct VectorField {
  DomainPtr domain;
  std::vector<std::vector<double>> comp;

  int dim() const { return static_cast<int>(comp.size()); }
  const Grid& grid() const { return domain->grid; }

  static VectorField zeros(DomainPtr d) {
    return VectorField{d, std::vector<std::vector<double>>(d->dim(), std::vector<double>(d->grid.size(), 0.0))};
  }

  template <class Fn>
  static VectorField sample(DomainPtr d, Fn&& fn) {
    VectorField v = zeros(d);
    for (std::size_t n : d->nodes) {
      const Point p = fn(d->grid.point(n));
      for (int k = 0; k < v.dim(); ++k) v.comp[k][n] = p[k];
    }
    return v;
  }

  double magnitude(std::size_t n) const {
    return dim() == 1 ? std::abs(comp[0][n]) : std::hypot(comp[0][n], comp[1][n]);
  }
};

namespace detail {

inline bool has_interior_node(const Domain& d) {
  const Grid& g = d.grid;
  for (std::size_t n : d.nodes) {
    const int i = g.col(n), j = g.row(n);
    bool all = d.inside(i - 1, j) && d.inside(i + 1, j);
    if (g.dim == 2) all = all && d.inside(i, j - 1) && d.inside(i, j + 1);
    if (all) return true;
  }
  return false;
}

// Derivative along `axis` at in-mask node n: central when both neighbours are
// in the mask, second-order one-sided otherwise.
inline double axis_derivative(const Domain& d, const std::vector<double>& v, std::size_t n, int axis) {
  const Grid& g = d.grid;
  const int i = g.col(n), j = g.row(n);
  const int di = axis == 0 ? 1 : 0, dj = axis == 0 ? 0 : 1;
  const bool plus = d.inside(i + di, j + dj), minus = d.inside(i - di, j - dj);
  const double f0 = v[n];
  if (plus && minus) return (v[g.index(i + di, j + dj)] - v[g.index(i - di, j - dj)]) / (2 * g.h);
  if (plus) {
    const double f1 = v[g.index(i + di, j + dj)];
    if (d.inside(i + 2 * di, j + 2 * dj))
      return (-3 * f0 + 4 * f1 - v[g.index(i + 2 * di, j + 2 * dj)]) / (2 * g.h);
    return (f1 - f0) / g.h;
  }
  if (minus) {
    const double f1 = v[g.index(i - di, j - dj)];
    if (d.inside(i - 2 * di, j - 2 * dj))
      return (3 * f0 - 4 * f1 + v[g.index(i - 2 * di, j - 2 * dj)]) / (2 * g.h);
    return (f0 - f1) / g.h;
  }
  return 0.0;
}

}  // namespace detail

inline VectorField gradient(const ScalarField& f) {
  const Domain& d = *f.domain;
  if (!detail::has_interior_node(d)) fail(ErrorKind::degenerate_domain, "domain has no interior node");
  VectorField g = VectorField::zeros(f.domain);
  for (std::size_t n : d.nodes)
    for (int k = 0; k < d.dim(); ++k) g.comp[k][n] = detail::axis_derivative(d, f.values, n, k);
  return g;
}

inline ScalarField divergence(const VectorField& u) {
  const Domain& d = *u.domain;
  if (u.dim() != d.dim()) fail(ErrorKind::shape_mismatch, "vector field dimension differs from domain");
  if (!detail::has_interior_node(d)) fail(ErrorKind::degenerate_domain, "domain has no interior node");
  ScalarField out = ScalarField::constant(u.domain, 0.0);
  for (std::size_t n : d.nodes) {
    double s = 0.0;
    for (int k = 0; k < d.dim(); ++k) s += detail::axis_derivative(d, u.comp[k], n, k);
    out.values[n] = s;
  }
  return out;
}

/// Rotated gradient (d/dy, -d/dx); divergence-free under the central stencil.
inline VectorField rotated_gradient(const ScalarField& gamma) {
  const VectorField g = gradient(gamma);
  VectorField r = VectorField::zeros(gamma.domain);
  if (r.dim() != 2) fail(ErrorKind::shape_mismatch, "rotated gradient needs a 2D domain");
  r.comp[0] = g.comp[1];
  r.comp[1] = g.comp[0];
  for (double& v : r.comp[1]) v = -v;
  return r;
}

/// Mask-weighted quadrature with cut-cell weights at the boundary. Nodes are
/// summed in ascending index order.
inline double integrate(const ScalarField& f) {
  double s = 0.0;
  for (std::size_t n : f.domain->nodes) s += f.domain->weights[n] * f.values[n];
  return s;
}

inline double max_abs(const std::vector<double>& v, std::span<const std::size_t> nodes) {
  double m = 0.0;
  for (std::size_t n : nodes) m = std::max(m, std::abs(v[n]));
  return m;
}

inline double max_abs(const ScalarField& f) { return max_abs(f.values, f.domain->nodes); }

inline double max_abs(const VectorField& u, std::span<const std::size_t> nodes) {
  double m = 0.0;
  for (std::size_t n : nodes) m = std::max(m, u.magnitude(n));
  return m;
}

// ---------------------------------------------------------------------------
// Hölder seminorms and norms

/// Pairs scanned exhaustively up to this count; above it, a strided subsample.
inline constexpr std::size_t default_pair_budget = 4'000'000;

struct HolderEstimate {
  int order_r = 0;
  double exponent_alpha = 1.0;
  double value = 0.0;
  std::size_t pair_budget = 0;  // node pairs actually scanned
  bool exhaustive = true;
};

struct PairScan {
  double value = 0.0;
  std::size_t pairs = 0;
  bool exhaustive = true;
};

/// sup |v(x)-v(y)| / |x-y|^alpha over node pairs of `region`. Exhaustive when
/// the pair count fits the budget; otherwise all pairs of a strided subsample
/// plus every pair of grid neighbours (incl. diagonals) inside the region.
/// Always a lower bound of the exhaustive value.
inline PairScan scan_holder_pairs(const Grid& g, const std::vector<double>& v,
                                  std::span<const std::size_t> region, double alpha,
                                  std::size_t budget = default_pair_budget) {
  if (!(alpha > 0 && alpha <= 1)) fail(ErrorKind::invalid_argument, "Hölder exponent must lie in (0,1]");
  if (region.size() < 2) fail(ErrorKind::degenerate_domain, "Hölder region needs at least two nodes");
  const double half = 0.5 * alpha;
  PairScan scan;
  auto ratio = [&](std::size_t a, std::size_t b) {
    const Point p = g.point(a), q = g.point(b);
    const double d2 = (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]);
    const double diff = std::abs(v[a] - v[b]);
    if (diff == 0.0) return 0.0;
    return alpha == 1.0 ? diff / std::sqrt(d2) : diff / std::pow(d2, half);
  };
  const std::size_t n = region.size();
  const std::size_t all_pairs = n * (n - 1) / 2;
  if (all_pairs <= budget) {
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) scan.value = std::max(scan.value, ratio(region[a], region[b]));
    scan.pairs = all_pairs;
    return scan;
  }
  scan.exhaustive = false;
  std::size_t m = static_cast<std::size_t>(std::floor(0.5 + std::sqrt(0.25 + 2.0 * static_cast<double>(budget))));
  while (m * (m - 1) / 2 > budget) --m;
  const std::size_t stride = (n + m - 1) / m;
  std::vector<std::size_t> sub;
  for (std::size_t k = 0; k < n; k += stride) sub.push_back(region[k]);
  for (std::size_t a = 0; a < sub.size(); ++a)
    for (std::size_t b = a + 1; b < sub.size(); ++b) scan.value = std::max(scan.value, ratio(sub[a], sub[b]));
  scan.pairs = sub.size() * (sub.size() - 1) / 2;
  std::vector<std::uint8_t> member(g.size(), 0);
  for (std::size_t r : region) member[r] = 1;
  const int offs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {-1, 1}};
  for (std::size_t r : region) {
    const int i = g.col(r), j = g.row(r);
    for (const auto& o : offs) {
      if (!g.contains(i + o[0], j + o[1])) continue;
      const std::size_t q = g.index(i + o[0], j + o[1]);
      if (!member[q]) continue;
      scan.value = std::max(scan.value, ratio(r, q));
      ++scan.pairs;
    }
  }
  return scan;
}

inline double holder_seminorm(const ScalarField& f, double alpha, std::span<const std::size_t> region,
                              std::size_t budget = default_pair_budget) {
  return scan_holder_pairs(f.grid(), f.values, region, alpha, budget).value;
}

/// Discrete C^{r,alpha} norm over the mask, r in {0,1}: the largest sup-norm
/// among f and its first discrete derivatives, plus the largest alpha-seminorm
/// of the top-order derivatives.
inline HolderEstimate holder_norm(const ScalarField& f, int r, double alpha,
                                  std::size_t budget = default_pair_budget) {
  if (r < 0 || r > 1) fail(ErrorKind::unsupported_order, "Hölder norms are supported for r in {0,1}");
  HolderEstimate est{r, alpha, 0.0, 0, true};
  const auto& nodes = f.domain->nodes;
  double sup = max_abs(f);
  double semi = 0.0;
  auto take = [&](const std::vector<double>& v) {
    const PairScan s = scan_holder_pairs(f.grid(), v, nodes, alpha, budget);
    semi = std::max(semi, s.value);
    est.pair_budget += s.pairs;
    est.exhaustive = est.exhaustive && s.exhaustive;
  };
  if (r == 0) {
    take(f.values);
  } else {
    const VectorField g = gradient(f);
    for (const auto& c : g.comp) {
      sup = std::max(sup, max_abs(c, nodes));
      take(c);
    }
  }
  est.value = sup + semi;
  return est;
}

/// Component-wise maximum of holder_norm.
inline HolderEstimate holder_norm(const VectorField& u, int r, double alpha,
                                  std::size_t budget = default_pair_budget) {
  HolderEstimate best{r, alpha, 0.0, 0, true};
  for (const auto& c : u.comp) {
    const HolderEstimate e = holder_norm(ScalarField{u.domain, c, Fill::zero}, r, alpha, budget);
    best.value = std::max(best.value, e.value);
    best.pair_budget += e.pair_budget;
    best.exhaustive = best.exhaustive && e.exhaustive;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Mollification

/// Sampled bump kernel exp(-1/(1-|x/r|^2)) on the ball of radius r,
/// renormalized to unit discrete mass.
struct MollifierKernel {
  std::vector<int> di, dj;
  std::vector<double> w;
};

inline MollifierKernel mollifier_kernel(const Grid& g, double radius) {
  MollifierKernel k;
  const int reach = static_cast<int>(std::ceil(radius / g.h));
  const int jreach = g.dim == 1 ? 0 : reach;
  double total = 0.0;
  for (int b = -jreach; b <= jreach; ++b)
    for (int a = -reach; a <= reach; ++a) {
      const double s2 = (a * a + b * b) * g.h * g.h / (radius * radius);
      if (s2 >= 1.0) continue;
      const double w = std::exp(-1.0 / (1.0 - s2));
      k.di.push_back(a);
      k.dj.push_back(b);
      k.w.push_back(w);
      total += w;
    }
  for (double& w : k.w) w /= total;
  return k;
}

/// Convolution with the unit-mass bump of the given radius. The field extends
/// by one outside the grid; the output is written as 1 + sum w (f - 1) so it is
/// exactly one wherever the kernel misses supp(f-1).
inline ScalarField mollify(const ScalarField& f, double radius) {
  if (f.fill != Fill::one) fail(ErrorKind::precondition, "mollify requires a density field (fill one)");
  const Grid& g = f.grid();
  if (radius < 2 * g.h) fail(ErrorKind::underresolved, "mollifier radius below two grid cells");
  const MollifierKernel k = mollifier_kernel(g, radius);
  ScalarField out = f;
  for (std::size_t n : f.domain->nodes) {
    const int i = g.col(n), j = g.row(n);
    double s = 0.0;
    for (std::size_t t = 0; t < k.w.size(); ++t) {
      const int a = i + k.di[t], b = j + k.dj[t];
      if (!g.contains(a, b)) continue;
      const double dv = f.values[g.index(a, b)] - 1.0;
      if (dv != 0.0) s += k.w[t] * dv;
    }
    out.values[n] = 1.0 + s;
  }
  return out;
}

}  // namespace jacshape
