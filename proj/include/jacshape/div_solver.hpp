#pragma once

// Divergence equation div u = h with u = 0 on a boundary collar (2D), built
// from a Neumann potential, a stream function on the collar and a smooth
// extension of it.
//
// Discretization: the Neumann potential w lives on the primal nodes; its
// gradient is taken on grid edges (staggered), so the 5-point Laplacian of w
// is exactly the edge-flux divergence. The stream function lives on cell
// corners (the dual grid); flux across a primal edge equals the jump of the
// stream function across it, so any corner field contributes an exactly
// divergence-free correction, and where h = 0 the edge fluxes form an exactly
// closed discrete 1-form. Node-centred vector fields are obtained by averaging
// the two edge fluxes adjacent to a node along each axis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "jacshape/domain.hpp"
#include "jacshape/error.hpp"
#include "jacshape/field.hpp"
#include "jacshape/linear_solve.hpp"
#include "jacshape/quadrature_1d.hpp"

namespace jacshape {

struct DivSolverOptions {
  double rtol = 1e-10;         // relative residual of the linear solves
  int max_iter_factor = 50;    // iteration cap = factor * unknowns
  double tol_period = 1e-6;    // stream-function consistency tolerance
  bool depth_first = false;    // spanning-tree order (BFS is canonical)
};

/// Fluxes on primal grid edges. fx(i, j) lives on edge (i,j)-(i+1,j),
/// fy(i, j) on edge (i,j)-(i,j+1). Edges with an off-mask endpoint carry 0.
struct EdgeFlux {
  Grid grid;
  std::vector<double> fx;  // (nx-1) * ny
  std::vector<double> fy;  // nx * (ny-1)

  explicit EdgeFlux(const Grid& g = {})
      : grid(g),
        fx(static_cast<std::size_t>(std::max(g.nx - 1, 0)) * g.ny, 0.0),
        fy(static_cast<std::size_t>(g.nx) * std::max(g.ny - 1, 0), 0.0) {}

  double x(int i, int j) const {
    return (i < 0 || i >= grid.nx - 1 || j < 0 || j >= grid.ny) ? 0.0
                                                                : fx[static_cast<std::size_t>(j) * (grid.nx - 1) + i];
  }
  double y(int i, int j) const {
    return (i < 0 || i >= grid.nx || j < 0 || j >= grid.ny - 1) ? 0.0
                                                                : fy[static_cast<std::size_t>(j) * grid.nx + i];
  }
  double& x_ref(int i, int j) { return fx[static_cast<std::size_t>(j) * (grid.nx - 1) + i]; }
  double& y_ref(int i, int j) { return fy[static_cast<std::size_t>(j) * grid.nx + i]; }

  /// Edge-flux divergence at node (i, j).
  double divergence(int i, int j) const {
    return (x(i, j) - x(i - 1, j) + y(i, j) - y(i, j - 1)) / grid.h;
  }
};

/// Values on cell corners: (nx+1) x (ny+1) nodes, corner (a, b) at
/// (x0 - h/2 + a h, y0 - h/2 + b h).
struct CornerField {
  Grid grid;
  std::vector<double> values;

  static CornerField zeros(const Grid& primal) {
    Grid g = primal;
    g.nx = primal.nx + 1;
    g.ny = primal.ny + 1;
    g.x0 = primal.x0 - 0.5 * primal.h;
    g.y0 = primal.y0 - 0.5 * primal.h;
    return CornerField{g, std::vector<double>(g.size(), 0.0)};
  }
  double at(int a, int b) const { return values[grid.index(a, b)]; }
};

struct NeumannSolution {
  ScalarField potential;  // zero mean
  EdgeFlux flux;          // staggered gradient of the potential (2D only)
  double residual_l2 = 0.0;
  int iterations = 0;
};

/// Stream function of a divergence-free field on the collar, stored on cell
/// corners. `support` marks corners whose four surrounding nodes lie in the
/// dilated collar band or outside the mask.
struct StreamPrimitive {
  CornerField gamma;
  std::vector<std::uint8_t> support;
  std::size_t base_node = 0;           // corner index where gamma = 0
  double closedness_residual = 0.0;    // max |loop sum| over cells inside the support
  double period_mismatch = 0.0;        // max inconsistency over non-tree edges
  std::vector<std::size_t> tree_order; // corners in visiting order
};

namespace detail {

inline int max_iterations(std::size_t unknowns, const DivSolverOptions& opt) {
  return static_cast<int>(std::min<std::size_t>(unknowns * opt.max_iter_factor, 1u << 30));
}

// Subtracts a constant on `shift` so that the `weights`-weighted sum of v over
// `nodes` vanishes.
inline void project_zero_sum(std::vector<double>& v, const std::vector<std::size_t>& nodes,
                             const std::vector<double>& weights, const std::vector<std::uint8_t>& shift) {
  double total = 0.0, shift_mass = 0.0;
  for (std::size_t n : nodes) {
    total += weights[n] * v[n];
    if (shift[n]) shift_mass += weights[n];
  }
  if (total == 0.0 || shift_mass == 0.0) return;
  const double c = total / shift_mass;
  for (std::size_t n : nodes)
    if (shift[n]) v[n] -= c;
}

inline void check_consistent(const ScalarField& h) {
  double total = integrate(h), absolute = 0.0;
  for (std::size_t n : h.domain->nodes) absolute += h.domain->weights[n] * std::abs(h.values[n]);
  if (std::abs(total) > 0.01 * absolute)
    fail(ErrorKind::inconsistent_datum,
         "divergence datum has nonzero mean: integral " + std::to_string(total) + " vs L1 norm " +
             std::to_string(absolute));
}

// 1D: u(x) = integral of h from the nearer end (the datum has zero total).
inline std::vector<double> cumulative_from_ends(const std::vector<double>& h, double step) {
  const std::size_t n = h.size();
  const CumulativeQuadrature left = cumulative_integral(h, step);
  std::vector<double> rev(h.rbegin(), h.rend());
  const CumulativeQuadrature right = cumulative_integral(rev, step);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = i < n / 2 ? left.at_nodes[i] : -right.at_nodes[n - 1 - i];
  return u;
}

inline NeumannSolution neumann_1d(const ScalarField& h, const std::vector<std::uint8_t>& shift) {
  const Domain& d = *h.domain;
  const Grid& g = d.grid;
  std::vector<double> rhs(h.values);
  const std::vector<double> q = total_weights(rhs.size(), g.h);
  detail::project_zero_sum(rhs, d.nodes, q, shift);
  const std::vector<double> u = cumulative_from_ends(rhs, g.h);
  NeumannSolution s;
  s.potential = ScalarField{h.domain, cumulative_integral(u, g.h).at_nodes, Fill::zero};
  const double mean = integrate(s.potential) / d.measure();
  for (double& w : s.potential.values) w -= mean;
  return s;
}

// Graph Laplacian of the mask with zero-flux edges to off-mask nodes.
inline NeumannSolution neumann_2d(const ScalarField& h, const std::vector<std::uint8_t>& shift,
                                  const DivSolverOptions& opt) {
  const Domain& d = *h.domain;
  const Grid& g = d.grid;
  std::vector<double> rhs(h.values);
  const std::vector<double> unit(g.size(), 1.0);
  detail::project_zero_sum(rhs, d.nodes, unit, shift);

  const std::size_t m = d.nodes.size();
  std::vector<int> local(g.size(), -1);
  for (std::size_t k = 0; k < m; ++k) local[d.nodes[k]] = static_cast<int>(k);
  std::vector<std::array<int, 4>> nbr(m);
  std::vector<double> diag(m, 0.0), b(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t n = d.nodes[k];
    const int i = g.col(n), j = g.row(n);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int e = 0; e < 4; ++e) {
      nbr[k][e] = d.inside(i + di[e], j + dj[e]) ? local[g.index(i + di[e], j + dj[e])] : -1;
      if (nbr[k][e] >= 0) diag[k] += 1.0;
    }
    b[k] = -g.h * g.h * rhs[n];
  }
  // Remove the rounding component along the constant null vector.
  double bmean = 0.0;
  for (double v : b) bmean += v;
  bmean /= static_cast<double>(m);
  for (double& v : b) v -= bmean;

  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t k = 0; k < m; ++k) {
      double s = diag[k] * x[k];
      for (int e = 0; e < 4; ++e)
        if (nbr[k][e] >= 0) s -= x[nbr[k][e]];
      y[k] = s;
    }
  };
  CgResult cg = conjugate_gradient(apply, b, diag, opt.rtol, max_iterations(m, opt));
  if (!cg.converged) {
    Error e(ErrorKind::solver_stall, "Neumann solve did not converge: relative residual " +
                                         std::to_string(cg.relative_residual));
    e.history = std::move(cg.history);
    throw e;
  }
  NeumannSolution s;
  s.potential = ScalarField::constant(h.domain, 0.0);
  for (std::size_t k = 0; k < m; ++k) s.potential.values[d.nodes[k]] = cg.x[k];
  const double mean = integrate(s.potential) / d.measure();
  for (std::size_t n : d.nodes) s.potential.values[n] -= mean;
  s.residual_l2 = cg.relative_residual;
  s.iterations = cg.iterations;

  s.flux = EdgeFlux(g);
  const auto& w = s.potential.values;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t n = g.index(i, j);
      if (!d.mask[n]) continue;
      if (d.inside(i + 1, j)) s.flux.x_ref(i, j) = (w[g.index(i + 1, j)] - w[n]) / g.h;
      if (d.inside(i, j + 1)) s.flux.y_ref(i, j) = (w[g.index(i, j + 1)] - w[n]) / g.h;
    }
  return s;
}

inline VectorField average_to_nodes(const EdgeFlux& f, const DomainPtr& domain) {
  const Grid& g = domain->grid;
  VectorField u = VectorField::zeros(domain);
  for (std::size_t n : domain->nodes) {
    const int i = g.col(n), j = g.row(n);
    u.comp[0][n] = 0.5 * (f.x(i - 1, j) + f.x(i, j));
    u.comp[1][n] = 0.5 * (f.y(i, j - 1) + f.y(i, j));
  }
  return u;
}

inline EdgeFlux average_to_edges(const VectorField& u) {
  const Domain& d = *u.domain;
  const Grid& g = d.grid;
  EdgeFlux f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t n = g.index(i, j);
      if (!d.mask[n]) continue;
      if (d.inside(i + 1, j)) f.x_ref(i, j) = 0.5 * (u.comp[0][n] + u.comp[0][g.index(i + 1, j)]);
      if (d.inside(i, j + 1)) f.y_ref(i, j) = 0.5 * (u.comp[1][n] + u.comp[1][g.index(i, j + 1)]);
    }
  return f;
}

// Nodes that are off-mask or within one node (8-neighbourhood) of the band.
inline std::vector<std::uint8_t> quiet_nodes(const CollarSpec& c) {
  const Domain& d = *c.domain;
  const Grid& g = d.grid;
  std::vector<std::uint8_t> quiet(g.size(), 0);
  for (std::size_t n = 0; n < g.size(); ++n) {
    if (!d.mask[n]) {
      quiet[n] = 1;
      continue;
    }
    const int i = g.col(n), j = g.row(n);
    for (int dj = -1; dj <= 1 && !quiet[n]; ++dj)
      for (int di = -1; di <= 1; ++di)
        if (g.contains(i + di, j + dj) && c.in_band[g.index(i + di, j + dj)]) {
          quiet[n] = 1;
          break;
        }
  }
  return quiet;
}

// Nodes whose 3x3 block is quiet: here the datum must vanish for the collar
// 1-form to be closed, and here the corrected field vanishes exactly.
inline std::vector<std::uint8_t> datum_free_nodes(const CollarSpec& c, const std::vector<std::uint8_t>& quiet) {
  const Grid& g = c.domain->grid;
  std::vector<std::uint8_t> z(g.size(), 0);
  for (std::size_t n : c.domain->nodes) {
    const int i = g.col(n), j = g.row(n);
    bool all = true;
    for (int dj = -1; dj <= 1 && all; ++dj)
      for (int di = -1; di <= 1; ++di)
        if (g.contains(i + di, j + dj) && !quiet[g.index(i + di, j + dj)]) {
          all = false;
          break;
        }
    z[n] = all;
  }
  return z;
}

// Corners whose four surrounding nodes are quiet (off-grid counts as quiet).
inline std::vector<std::uint8_t> quiet_corners(const CollarSpec& c, const std::vector<std::uint8_t>& quiet) {
  const Grid& g = c.domain->grid;
  const CornerField probe = CornerField::zeros(g);
  const Grid& cg = probe.grid;
  auto quiet_at = [&](int i, int j) { return !g.contains(i, j) || quiet[g.index(i, j)]; };
  std::vector<std::uint8_t> out(cg.size(), 0);
  for (int b = 0; b < cg.ny; ++b)
    for (int a = 0; a < cg.nx; ++a)
      out[cg.index(a, b)] = quiet_at(a - 1, b - 1) && quiet_at(a, b - 1) && quiet_at(a - 1, b) && quiet_at(a, b);
  return out;
}

// Spanning tree of the quiet corners reachable from corner (0, 0). Each
// visited corner records its parent and the direction it was entered from.
struct SpanningTree {
  Grid corners;
  std::vector<std::uint8_t> support;
  std::vector<std::size_t> order;
  std::vector<std::size_t> parent;
  std::vector<std::int8_t> step;  // 0: +a, 1: -a, 2: +b, 3: -b
};

inline SpanningTree spanning_tree(const CollarSpec& c, bool depth_first) {
  const Domain& d = *c.domain;
  if (d.dim() != 2) fail(ErrorKind::shape_mismatch, "stream primitives are two-dimensional");
  if (d.boundary_components != 1)
    fail(ErrorKind::unsupported_topology, "collar stream function requires a connected boundary");
  const std::vector<std::uint8_t> candidate = quiet_corners(c, quiet_nodes(c));
  SpanningTree t;
  t.corners = CornerField::zeros(d.grid).grid;
  const Grid& cg = t.corners;
  t.support.assign(cg.size(), 0);
  t.parent.assign(cg.size(), 0);
  t.step.assign(cg.size(), -1);
  const std::size_t base = cg.index(0, 0);
  std::deque<std::size_t> frontier{base};
  t.support[base] = 1;
  t.parent[base] = base;
  const int da[4] = {1, -1, 0, 0}, db[4] = {0, 0, 1, -1};
  while (!frontier.empty()) {
    std::size_t cur;
    if (depth_first) {
      cur = frontier.back();
      frontier.pop_back();
    } else {
      cur = frontier.front();
      frontier.pop_front();
    }
    t.order.push_back(cur);
    const int a = cg.col(cur), b = cg.row(cur);
    for (int e = 0; e < 4; ++e) {
      const int na = a + da[e], nb = b + db[e];
      if (!cg.contains(na, nb)) continue;
      const std::size_t nxt = cg.index(na, nb);
      if (!candidate[nxt] || t.support[nxt]) continue;
      t.support[nxt] = 1;
      t.parent[nxt] = cur;
      t.step[nxt] = static_cast<std::int8_t>(e);
      frontier.push_back(nxt);
    }
  }
  return t;
}

// Jump of gamma from corner (a, b) to its neighbour in direction e. Going up
// crosses primal x-edge (a-1, b); going right crosses primal y-edge (a, b-1).
inline double corner_jump(const EdgeFlux& f, int a, int b, int e) {
  const double h = f.grid.h;
  switch (e) {
    case 0: return -h * f.y(a, b - 1);
    case 1: return h * f.y(a - 1, b - 1);
    case 2: return h * f.x(a - 1, b);
    default: return -h * f.x(a - 1, b - 1);
  }
}

inline StreamPrimitive integrate_tree(const SpanningTree& t, const EdgeFlux& f, const DivSolverOptions& opt) {
  const Grid& cg = t.corners;
  const Grid& g = f.grid;
  StreamPrimitive sp;
  sp.gamma = CornerField::zeros(g);
  sp.support = t.support;
  sp.base_node = t.order.front();
  sp.tree_order = t.order;
  auto& gv = sp.gamma.values;
  for (std::size_t k = 1; k < t.order.size(); ++k) {
    const std::size_t cur = t.order[k], par = t.parent[cur];
    gv[cur] = gv[par] + corner_jump(f, cg.col(par), cg.row(par), t.step[cur]);
  }
  for (int b = 0; b < cg.ny; ++b)
    for (int a = 0; a < cg.nx; ++a) {
      const std::size_t p = cg.index(a, b);
      if (!t.support[p]) continue;
      if (a + 1 < cg.nx && t.support[cg.index(a + 1, b)])
        sp.period_mismatch =
            std::max(sp.period_mismatch, std::abs(gv[cg.index(a + 1, b)] - gv[p] - corner_jump(f, a, b, 0)));
      if (b + 1 < cg.ny && t.support[cg.index(a, b + 1)])
        sp.period_mismatch =
            std::max(sp.period_mismatch, std::abs(gv[cg.index(a, b + 1)] - gv[p] - corner_jump(f, a, b, 2)));
    }
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!(t.support[cg.index(i, j)] && t.support[cg.index(i + 1, j)] && t.support[cg.index(i, j + 1)] &&
            t.support[cg.index(i + 1, j + 1)]))
        continue;
      sp.closedness_residual = std::max(sp.closedness_residual, g.h * g.h * std::abs(f.divergence(i, j)));
    }
  if (sp.period_mismatch > opt.tol_period)
    fail(ErrorKind::nonzero_period,
         "collar 1-form has a nonzero period: mismatch " + std::to_string(sp.period_mismatch));
  return sp;
}

}  // namespace detail

enum class Extension {
  harmonic,     // 5-point Laplace, Dirichlet data on the support
  triharmonic,  // least |grad Laplacian|^2; matches value, slope and curvature
};

/// Extension of a stream function from its support to all corners. The
/// triharmonic operator is factored once and can be applied repeatedly.
class PrimitiveExtension {
 public:
  PrimitiveExtension(const Grid& corners, std::vector<std::uint8_t> support, Extension kind,
                     const DivSolverOptions& opt = {})
      : corners_(corners), support_(std::move(support)), kind_(kind), opt_(opt) {
    local_.assign(corners_.size(), -1);
    for (std::size_t p = 0; p < corners_.size(); ++p)
      if (!support_[p]) {
        local_[p] = static_cast<int>(unknown_.size());
        unknown_.push_back(p);
      }
    if (kind_ == Extension::triharmonic && !unknown_.empty()) build_triharmonic();
  }

  Extension kind() const { return kind_; }

  CornerField apply(const CornerField& gamma) const {
    CornerField out = gamma;
    if (unknown_.empty()) return out;
    const std::vector<double> x = kind_ == Extension::harmonic ? solve_harmonic(gamma) : solve_triharmonic(gamma);
    for (std::size_t k = 0; k < unknown_.size(); ++k) out.values[unknown_[k]] = x[k];
    return out;
  }

 private:
  struct Row {
    std::vector<std::pair<int, double>> unknowns;
    std::vector<std::pair<std::size_t, double>> known;
  };

  std::vector<double> solve_harmonic(const CornerField& gamma) const {
    const Grid& cg = corners_;
    const std::size_t m = unknown_.size();
    std::vector<std::array<int, 4>> nbr(m);
    std::vector<double> diag(m, 0.0), b(m, 0.0);
    const int da[4] = {1, -1, 0, 0}, db[4] = {0, 0, 1, -1};
    for (std::size_t k = 0; k < m; ++k) {
      const int a = cg.col(unknown_[k]), c = cg.row(unknown_[k]);
      for (int e = 0; e < 4; ++e) {
        nbr[k][e] = -1;
        if (!cg.contains(a + da[e], c + db[e])) continue;
        const std::size_t q = cg.index(a + da[e], c + db[e]);
        diag[k] += 1.0;
        if (support_[q])
          b[k] += gamma.values[q];
        else
          nbr[k][e] = local_[q];
      }
    }
    auto op = [&](const std::vector<double>& x, std::vector<double>& y) {
      for (std::size_t k = 0; k < m; ++k) {
        double s = diag[k] * x[k];
        for (int e = 0; e < 4; ++e)
          if (nbr[k][e] >= 0) s -= x[nbr[k][e]];
        y[k] = s;
      }
    };
    CgResult r = conjugate_gradient(op, b, diag, opt_.rtol, detail::max_iterations(m, opt_));
    if (!r.converged) {
      Error e(ErrorKind::solver_stall, "harmonic extension did not converge: relative residual " +
                                           std::to_string(r.relative_residual));
      e.history = std::move(r.history);
      throw e;
    }
    return r.x;
  }

  // Rows: differences of 5-point Laplacians at neighbouring corners.
  void build_triharmonic() {
    const Grid& cg = corners_;
    std::vector<int> lap(cg.size(), -1);
    std::vector<Row> laps;
    for (int b = 1; b + 1 < cg.ny; ++b)
      for (int a = 1; a + 1 < cg.nx; ++a) {
        const std::size_t idx[5] = {cg.index(a, b), cg.index(a + 1, b), cg.index(a - 1, b), cg.index(a, b + 1),
                                    cg.index(a, b - 1)};
        const double co[5] = {-4, 1, 1, 1, 1};
        Row r;
        for (int k = 0; k < 5; ++k) {
          if (local_[idx[k]] >= 0)
            r.unknowns.emplace_back(local_[idx[k]], co[k]);
          else
            r.known.emplace_back(idx[k], co[k]);
        }
        lap[idx[0]] = static_cast<int>(laps.size());
        laps.push_back(std::move(r));
      }
    std::vector<Eigen::Triplet<double>> trip;
    for (int b = 0; b < cg.ny; ++b)
      for (int a = 0; a < cg.nx; ++a) {
        const int p = lap[cg.index(a, b)];
        if (p < 0) continue;
        for (int dir = 0; dir < 2; ++dir) {
          const int a2 = a + (dir == 0), b2 = b + (dir == 1);
          if (!cg.contains(a2, b2)) continue;
          const int q = lap[cg.index(a2, b2)];
          if (q < 0 || (laps[p].unknowns.empty() && laps[q].unknowns.empty())) continue;
          Row r;
          const int row = static_cast<int>(rows_.size());
          for (const auto& [col, v] : laps[p].unknowns) trip.emplace_back(row, col, v);
          for (const auto& [col, v] : laps[q].unknowns) trip.emplace_back(row, col, -v);
          r.known = laps[p].known;
          for (const auto& [n, v] : laps[q].known) r.known.emplace_back(n, -v);
          rows_.push_back(std::move(r));
        }
      }
    a_.resize(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(unknown_.size()));
    a_.setFromTriplets(trip.begin(), trip.end());
    const Eigen::SparseMatrix<double> normal = a_.transpose() * a_;
    chol_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(normal);
    if (chol_->info() != Eigen::Success)
      fail(ErrorKind::solver_stall, "triharmonic extension operator is singular");
  }

  std::vector<double> solve_triharmonic(const CornerField& gamma) const {
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      double s = 0.0;
      for (const auto& [n, v] : rows_[r].known) s += v * gamma.values[n];
      rhs[static_cast<Eigen::Index>(r)] = -s;
    }
    const Eigen::VectorXd x = chol_->solve(a_.transpose() * rhs);
    return std::vector<double>(x.data(), x.data() + x.size());
  }

  Grid corners_;
  std::vector<std::uint8_t> support_;
  Extension kind_;
  DivSolverOptions opt_;
  std::vector<int> local_;
  std::vector<std::size_t> unknown_;
  std::vector<Row> rows_;
  Eigen::SparseMatrix<double> a_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> chol_;
};

/// Neumann potential: 5-point Laplacian with zero flux across the mask edge,
/// datum projected to zero sum, potential normalized to zero mean.
inline NeumannSolution solve_neumann(const ScalarField& h, const DivSolverOptions& opt = {}) {
  detail::check_consistent(h);
  return h.domain->dim() == 1 ? detail::neumann_1d(h, h.domain->mask) : detail::neumann_2d(h, h.domain->mask, opt);
}

/// First solution u0 of div u0 = h: the gradient of the Neumann potential
/// (in 1D, the running integral of h).
inline VectorField solve_div_basic(const ScalarField& h, const DivSolverOptions& opt = {}) {
  detail::check_consistent(h);
  if (h.domain->dim() == 1) {
    std::vector<double> rhs(h.values);
    detail::project_zero_sum(rhs, h.domain->nodes, total_weights(rhs.size(), h.grid().h), h.domain->mask);
    VectorField u = VectorField::zeros(h.domain);
    u.comp[0] = detail::cumulative_from_ends(rhs, h.grid().h);
    return u;
  }
  return detail::average_to_nodes(detail::neumann_2d(h, h.domain->mask, opt).flux, h.domain);
}

/// Stream function gamma with rotated_gradient(gamma) = u0 on the collar band.
/// u0 is converted to edge fluxes by averaging adjacent nodes.
inline StreamPrimitive stream_primitive(const VectorField& u0, const CollarSpec& c,
                                        const DivSolverOptions& opt = {}) {
  if (u0.dim() != 2) fail(ErrorKind::shape_mismatch, "stream primitives are two-dimensional");
  return detail::integrate_tree(detail::spanning_tree(c, opt.depth_first), detail::average_to_edges(u0), opt);
}

inline CornerField extend_primitive(const StreamPrimitive& sp, Extension kind = Extension::triharmonic,
                                    const DivSolverOptions& opt = {}) {
  return PrimitiveExtension(sp.gamma.grid, sp.support, kind, opt).apply(sp.gamma);
}

/// Everything produced by a collar-supported divergence solve.
struct CollarDivSolution {
  VectorField u;
  NeumannSolution neumann;
  StreamPrimitive primitive;
  CornerField extension;
  EdgeFlux flux;             // corrected edge fluxes; their divergence equals the datum
  double band_max = 0.0;     // max |u| over band nodes
  double tol_support = 0.0;  // max(10 * closedness residual, 1e-6 + 5 h^2)
};

/// div u = h with u = 0 on the collar band, for repeated data on one collar.
/// The datum must vanish on the band; it is projected to zero mean by a
/// constant shift away from the band.
class CollarDivSolver {
 public:
  explicit CollarDivSolver(CollarSpec c, const DivSolverOptions& opt = {}, Extension kind = Extension::triharmonic)
      : collar_(std::move(c)), opt_(opt) {
    const Domain& d = *collar_.domain;
    shift_ = d.mask;
    if (d.dim() == 1) {
      for (std::size_t n : collar_.band) shift_[n] = 0;
      return;
    }
    const std::vector<std::uint8_t> quiet = detail::quiet_nodes(collar_);
    const std::vector<std::uint8_t> datum_free = detail::datum_free_nodes(collar_, quiet);
    for (std::size_t n = 0; n < shift_.size(); ++n)
      if (datum_free[n] || collar_.in_band[n]) shift_[n] = 0;
    tree_ = detail::spanning_tree(collar_, opt_.depth_first);
    extension_ = std::make_shared<PrimitiveExtension>(tree_.corners, tree_.support, kind, opt_);
  }

  const CollarSpec& collar() const { return collar_; }

  CollarDivSolution solve(const ScalarField& h) const {
    const Domain& d = *h.domain;
    if (!d.grid.same_as(collar_.domain->grid) || d.mask != collar_.domain->mask)
      fail(ErrorKind::shape_mismatch, "collar and datum live on different domains");
    for (std::size_t n : collar_.band)
      if (std::abs(h.values[n]) > 1e-12) {
        Error e(ErrorKind::precondition, "divergence datum is nonzero on the collar band");
        e.nodes.push_back(n);
        throw e;
      }
    detail::check_consistent(h);
    CollarDivSolution out;
    const double hh = d.grid.h;
    if (d.dim() == 1) {
      out.neumann = detail::neumann_1d(h, shift_);
      std::vector<double> rhs(h.values);
      detail::project_zero_sum(rhs, d.nodes, total_weights(rhs.size(), hh), shift_);
      out.u = VectorField::zeros(h.domain);
      out.u.comp[0] = detail::cumulative_from_ends(rhs, hh);
    } else {
      out.neumann = detail::neumann_2d(h, shift_, opt_);
      out.primitive = detail::integrate_tree(tree_, out.neumann.flux, opt_);
      out.extension = extension_->apply(out.primitive.gamma);
      out.flux = out.neumann.flux;
      const Grid& g = d.grid;
      const CornerField& gt = out.extension;
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          if (!d.mask[g.index(i, j)]) continue;
          if (d.inside(i + 1, j)) out.flux.x_ref(i, j) -= (gt.at(i + 1, j + 1) - gt.at(i + 1, j)) / hh;
          if (d.inside(i, j + 1)) out.flux.y_ref(i, j) += (gt.at(i + 1, j + 1) - gt.at(i, j + 1)) / hh;
        }
      out.u = detail::average_to_nodes(out.flux, h.domain);
    }
    out.band_max = max_abs(out.u, collar_.band);
    out.tol_support = std::max(10 * out.primitive.closedness_residual, 1e-6 + 5 * hh * hh);
    return out;
  }

 private:
  CollarSpec collar_;
  DivSolverOptions opt_;
  std::vector<std::uint8_t> shift_;
  detail::SpanningTree tree_;
  std::shared_ptr<PrimitiveExtension> extension_;
};

inline CollarDivSolution solve_div_collar_full(const ScalarField& h, const CollarSpec& c,
                                               const DivSolverOptions& opt = {}) {
  return CollarDivSolver(c, opt).solve(h);
}

inline VectorField solve_div_collar(const ScalarField& h, const CollarSpec& c, const DivSolverOptions& opt = {}) {
  return solve_div_collar_full(h, c, opt).u;
}

}  // namespace jacshape
