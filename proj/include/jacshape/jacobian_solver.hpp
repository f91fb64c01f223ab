#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "jacshape/div_solver.hpp"
#include "jacshape/domain.hpp"
#include "jacshape/field.hpp"
#include "jacshape/grid_map.hpp"
#include "jacshape/moser.hpp"
#include "jacshape/quadrature_1d.hpp"
#include "jacshape/report.hpp"

namespace jacshape {

namespace detail {

// Rethrows solver errors with the pipeline stage attached.
template <class Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

// Removes the quadrature mass of g by a correction proportional to |g|, so
// nodes where g = 0 are untouched.
inline void remove_mass(std::vector<double>& g, const std::vector<std::size_t>& nodes,
                        const std::vector<double>& weights) {
  double total = 0.0, absolute = 0.0;
  for (std::size_t n : nodes) {
    total += weights[n] * g[n];
    absolute += weights[n] * std::abs(g[n]);
  }
  if (total == 0.0 || absolute == 0.0) return;
  const double c = total / absolute;
  for (std::size_t n : nodes) g[n] -= c * std::abs(g[n]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// One dimension

/// phi(x) = a + integral of f from a to x, by fourth-order cumulative
/// quadrature. The mass defect of f - 1 is removed in proportion to |f - 1|, so
/// phi is the identity node-wise wherever f = 1 near either end.
inline std::pair<GridMap, SolveReport> solve_1d(const ScalarField& f, double tol_mass = 1e-4) {
  const Domain& d = *f.domain;
  if (d.dim() != 1) fail(ErrorKind::shape_mismatch, "solve_1d requires an interval domain");
  detail::check_density(f, tol_mass);
  std::vector<double> g(f.values.size(), 0.0);
  for (std::size_t n : d.nodes) g[n] = f.values[n] - 1.0;
  detail::remove_mass(g, d.nodes, total_weights(g.size(), d.h()));
  GridMap phi{VectorField::zeros(f.domain), Interp::bicubic};
  phi.displacement.comp[0] = detail::cumulative_from_ends(g, d.h());
  for (std::size_t i = 0; i + 1 < d.nodes.size(); ++i)
    if (!(phi.node_image(i + 1)[0] > phi.node_image(i)[0]))
      fail(ErrorKind::orientation_loss, "one-dimensional map is not increasing");
  SolveReport r;
  r.method = Method::oned;
  std::vector<std::size_t> fixed;
  for (std::size_t n : d.nodes)
    if (phi.displacement.comp[0][n] == 0.0 && f.values[n] == 1.0) fixed.push_back(n);
  fill_report(r, phi, f, fixed);
  return {std::move(phi), r};
}

// ---------------------------------------------------------------------------
// Quadratic remainder

/// Per-node Jacobian matrices (row-major a, b, c, d), or 1x1 in 1D.
struct MatrixField {
  DomainPtr domain;
  int dim = 2;
  std::vector<std::array<double, 4>> m;
};

inline MatrixField jacobian_matrix(const VectorField& v) {
  const Domain& d = *v.domain;
  MatrixField out{v.domain, d.dim(), std::vector<std::array<double, 4>>(d.grid.size(), {0, 0, 0, 0})};
  for (std::size_t n : d.nodes) {
    auto& a = out.m[n];
    a[0] = detail::axis_derivative(d, v.comp[0], n, 0);
    if (d.dim() == 2) {
      a[1] = detail::axis_derivative(d, v.comp[0], n, 1);
      a[2] = detail::axis_derivative(d, v.comp[1], n, 0);
      a[3] = detail::axis_derivative(d, v.comp[1], n, 1);
    }
  }
  return out;
}

/// Q(xi) = det(I + xi) - 1 - tr(xi): det xi in 2D, 0 in 1D.
inline double q_value(const std::array<double, 4>& xi, int dim) {
  return dim == 2 ? xi[0] * xi[3] - xi[1] * xi[2] : 0.0;
}

inline ScalarField q_residual(const MatrixField& grad_v) {
  ScalarField q = ScalarField::constant(grad_v.domain, 0.0);
  for (std::size_t n : grad_v.domain->nodes) q.values[n] = q_value(grad_v.m[n], grad_v.dim);
  return q;
}

// ---------------------------------------------------------------------------
// Fixed point

struct FixedPointConfig {
  double gamma = 0.5;               // Hölder exponent of the smallness gate
  double epsilon_threshold = 0.05;  // gate on holder_norm(f - 1, 0, gamma)
  bool gate = true;
  int max_iter = 30;
  double contraction_tol = 1e-9;  // on the discrete C^1 norm of successive differences
  double tol_mass = 1e-4;
};

struct FixedPointResult {
  GridMap phi;
  SolveReport report;
  VectorField v;
  double gate_value = 0.0;
};

/// v_{m+1} solves div v = f - 1 - Q(grad v_m) with v = 0 on the band; phi = id + v.
inline FixedPointResult fixedpoint_solve(const ScalarField& f, const CollarDivSolver& div,
                                         const FixedPointConfig& cfg = {}) {
  const CollarSpec& c = div.collar();
  detail::check_density(f, cfg.tol_mass);
  detail::check_one_on(f, c.band, "collar band");
  const Domain& d = *f.domain;
  FixedPointResult out;
  const ScalarField h0 = detail::minus_one(f);
  out.gate_value = holder_norm(h0, 0, cfg.gamma).value;
  if (cfg.gate && out.gate_value > cfg.epsilon_threshold)
    fail(ErrorKind::contraction_failure, "smallness gate: holder norm of f - 1 is " + std::to_string(out.gate_value) +
                                             " > " + std::to_string(cfg.epsilon_threshold));
  out.report.method = Method::fixedpoint;
  out.report.collar_thickness = c.thickness;

  auto c1_norm = [&](const VectorField& a) {
    double s = max_abs(a, d.nodes);
    const MatrixField j = jacobian_matrix(a);
    for (std::size_t n : d.nodes)
      for (int k = 0; k < (d.dim() == 2 ? 4 : 1); ++k) s = std::max(s, std::abs(j.m[n][k]));
    return s;
  };

  VectorField v = VectorField::zeros(f.domain);
  for (int it = 1;; ++it) {
    if (it > cfg.max_iter) {
      Error e(ErrorKind::contraction_failure, "fixed point did not converge in " + std::to_string(cfg.max_iter) +
                                                  " iterations");
      e.history = out.report.iterate_differences;
      throw e;
    }
    ScalarField rhs = h0;
    if (d.dim() == 2) {
      const ScalarField q = q_residual(jacobian_matrix(v));
      for (std::size_t n : d.nodes)
        if (!c.in_band[n]) rhs.values[n] -= q.values[n];
    }
    VectorField next = div.solve(rhs).u;
    VectorField diff = next;
    for (int k = 0; k < diff.dim(); ++k)
      for (std::size_t n : d.nodes) diff.comp[k][n] -= v.comp[k][n];
    const double delta = c1_norm(diff);
    out.report.iterate_differences.push_back(delta);
    v = std::move(next);
    out.report.iterations = it;
    if (delta <= cfg.contraction_tol) break;
    if (delta >= 10 * out.report.iterate_differences.front() && it > 1) {
      Error e(ErrorKind::contraction_failure, "fixed-point iterates diverge");
      e.history = out.report.iterate_differences;
      throw e;
    }
  }
  out.v = v;
  out.phi = GridMap{v, Interp::bicubic};
  fill_report(out.report, out.phi, f, c.band);
  return out;
}

inline FixedPointResult fixedpoint_solve(const ScalarField& f, const CollarSpec& c, const FixedPointConfig& cfg = {}) {
  return fixedpoint_solve(f, CollarDivSolver(c), cfg);
}

// ---------------------------------------------------------------------------
// Measure correction

struct MeasureCorrection {
  ScalarField f_tilde;
  ScalarField bump_H;
  double t_hat = 0.0;
  double t_hat_bisection = 0.0;
  double m_minus = 0.0;  // m(-1)
  double m_zero = 0.0;   // m(0)
  double m_plus = 0.0;   // m(1)
  ScalarField F;
  double mass_error = 0.0;
  double working_band = 0.0;  // H vanishes where sdist >= -working_band
};

/// Squared-cosine ramp: 0 for sdist >= -w, 1 for sdist <= -2w.
inline double bump_base(double sdist, double w) {
  if (sdist >= -w) return 0.0;
  if (sdist <= -2 * w) return 1.0;
  const double s = (-sdist - w) / w;
  const double c = std::cos(0.5 * std::numbers::pi * s);
  return 1 - c * c;
}

inline MeasureCorrection measure_correct(const ScalarField& f, const CollarSpec& c, double mollify_radius,
                                         double bump_eta = 0.05) {
  const Domain& d = *f.domain;
  if (f.fill != Fill::one) fail(ErrorKind::precondition, "density must extend by one (fill one)");
  if (!(bump_eta > 0 && bump_eta < 1)) fail(ErrorKind::invalid_argument, "bump_eta must lie in (0, 1)");
  {
    Error e(ErrorKind::precondition, "density differs from one within three mollifier radii of the collar");
    for (std::size_t n : d.nodes)
      if (d.sdist[n] > -(c.epsilon + 3 * mollify_radius) && f.values[n] != 1.0) e.nodes.push_back(n);
    if (!e.nodes.empty()) throw e;
  }
  MeasureCorrection mc;
  mc.f_tilde = mollify(f, mollify_radius);
  mc.working_band = c.epsilon + 2 * d.h();
  mc.bump_H = ScalarField::constant(f.domain, 0.0);
  for (std::size_t n : d.nodes) mc.bump_H.values[n] = bump_eta * bump_base(d.sdist[n], mc.working_band);

  const double meas = d.measure();
  ScalarField ratio = ScalarField::constant(f.domain, 1.0, Fill::one);
  for (std::size_t n : d.nodes) ratio.values[n] = f.values[n] / mc.f_tilde.values[n];
  double m0 = 0.0, slope = 0.0;
  for (std::size_t n : d.nodes) {
    m0 += d.weights[n] * ratio.values[n];
    slope += d.weights[n] * ratio.values[n] * mc.bump_H.values[n];
  }
  auto m = [&](double t) {
    double s = 0.0;
    for (std::size_t n : d.nodes) s += d.weights[n] * ratio.values[n] * (1 + t * mc.bump_H.values[n]);
    return s;
  };
  mc.m_zero = m0;
  mc.m_minus = m(-1.0);
  mc.m_plus = m(1.0);
  if (!(mc.m_minus < meas && meas < mc.m_plus))
    fail(ErrorKind::bracket_failure, "measure bracket fails: m(-1) = " + std::to_string(mc.m_minus) +
                                         ", m(1) = " + std::to_string(mc.m_plus) + ", meas = " +
                                         std::to_string(meas));
  mc.t_hat = (meas - m0) / slope;
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 0; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double mv = m(mid);
    if (std::abs(mv - meas) <= 1e-12 * meas || mid == lo || mid == hi) {
      lo = hi = mid;
      break;
    }
    (mv < meas ? lo : hi) = mid;
  }
  mc.t_hat_bisection = 0.5 * (lo + hi);

  mc.F = ScalarField::constant(f.domain, 1.0, Fill::one);
  Error neg(ErrorKind::positivity, "corrected density is not positive");
  for (std::size_t n : d.nodes) {
    mc.F.values[n] = (1 + mc.t_hat * mc.bump_H.values[n]) * ratio.values[n];
    if (!(mc.F.values[n] > 0)) neg.nodes.push_back(n);
  }
  if (!neg.nodes.empty()) throw neg;
  mc.mass_error = std::abs(integrate(mc.F) - meas);
  return mc;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct SupportedConfig {
  FixedPointConfig fixed_point;
  FlowConfig flow;
  double mollify_radius = 0.05;
  double bump_eta = 0.05;
  double tol_mass = 1e-4;  // relative, for G after the change of variables
  bool gate_corrected = false;  // smallness gate on F; divergence is still detected
};

struct SupportedResult {
  GridMap phi;
  SolveReport report;
  MeasureCorrection correction;
  GridMap phi1;
  GridMap phi2;
  ScalarField G;
};

/// phi = phi2 o phi1: phi1 solves det = F (fixed point) for the measure-corrected
/// F, phi2 solves det = G = (f_tilde / h) o phi1^{-1} (Moser flow).
inline SupportedResult solve_supported(const ScalarField& f, const CollarDivSolver& div,
                                       const SupportedConfig& cfg = {}) {
  const CollarSpec& c = div.collar();
  const Domain& d = *f.domain;
  detail::check_density(f, cfg.fixed_point.tol_mass);
  SupportedResult out;
  out.correction = detail::staged("measure_correct",
                                  [&] { return measure_correct(f, c, cfg.mollify_radius, cfg.bump_eta); });
  const MeasureCorrection& mc = out.correction;
  FixedPointConfig fpc = cfg.fixed_point;
  fpc.gate = fpc.gate && cfg.gate_corrected;
  FixedPointResult fp = detail::staged("fixedpoint", [&] { return fixedpoint_solve(mc.F, div, fpc); });
  out.phi1 = fp.phi;

  out.G = detail::staged("change_of_variables", [&] {
    const GridMap inv = invert(out.phi1);
    std::vector<double> q(d.grid.size(), 1.0);
    for (std::size_t n : d.nodes) q[n] = mc.f_tilde.values[n] / (1 + mc.t_hat * mc.bump_H.values[n]);
    ScalarField G = ScalarField::constant(f.domain, 1.0, Fill::one);
    for (std::size_t n : d.nodes) {
      const Point y = detail::clamp_to_box(d.grid, inv.node_image(n));
      G.values[n] = interpolate(d.grid, q, 1.0, y, cfg.flow.interp).value;
    }
    for (std::size_t n : c.band) G.values[n] = 1.0;
    const double meas = d.measure();
    const double defect = integrate(G) - meas;
    if (std::abs(defect) > cfg.tol_mass * meas)
      fail(ErrorKind::change_of_variables_drift,
           "mass of G differs from the domain measure by " + std::to_string(defect));
    return G;
  });
  MoserResult ms = detail::staged("moser", [&] { return moser_solve(out.G, div, cfg.flow); });
  out.phi2 = ms.phi;
  out.phi = detail::staged("compose", [&] { return compose(out.phi2, out.phi1); });

  out.report.method = Method::full;
  out.report.collar_thickness = c.thickness;
  out.report.iterations = fp.report.iterations;
  out.report.iterate_differences = fp.report.iterate_differences;
  out.report.warnings = ms.report.warnings;
  fill_report(out.report, out.phi, f, c.band);
  return out;
}

inline SupportedResult solve_supported(const ScalarField& f, const CollarSpec& c, const SupportedConfig& cfg = {}) {
  return solve_supported(f, CollarDivSolver(c), cfg);
}

// ---------------------------------------------------------------------------
// General domains

enum class Route { automatic, moser, fixedpoint, full };

struct GeneralConfig {
  SupportedConfig supported;
  Route route = Route::full;
};

struct GeneralResult {
  GridMap phi;
  SolveReport report;
  DomainPtr subdomain;                    // null when f = 1
  std::vector<std::size_t> identity_region;  // V_d, ascending node indices of the full domain
  Method used = Method::general;
};

/// Identity region for distance d: nodes of the domain outside the exhausted
/// subdomain or inside its collar of width d/8. Depends on (domain, d) only.
inline std::vector<std::size_t> identity_region(const Domain& d, double dist) {
  std::vector<std::size_t> v;
  for (std::size_t n : d.nodes) {
    const double s = d.sdist[n];
    const bool outside_sub = !(s + 0.5 * dist < 0);
    const bool in_collar = (s + 0.5 * dist) >= -dist / 8;
    if (outside_sub || in_collar) v.push_back(n);
  }
  return v;
}

namespace detail {

inline ScalarField restrict_to(const ScalarField& f, const DomainPtr& sub) {
  ScalarField g = ScalarField::constant(sub, 1.0, f.fill);
  for (std::size_t n : sub->nodes) g.values[n] = f.values[n];
  return g;
}

inline GridMap extend_by_identity(const GridMap& phi, const DomainPtr& full) {
  GridMap out{VectorField::zeros(full), phi.interp};
  for (int k = 0; k < out.dim(); ++k)
    for (std::size_t n : phi.domain()->nodes) out.displacement.comp[k][n] = phi.displacement.comp[k][n];
  return out;
}

}  // namespace detail

/// Solve on the exhausted subdomain at distance d (collar d/8, mollifier
/// radius d/8) and extend by the identity.
inline GeneralResult solve_general(const ScalarField& f, double dist, const GeneralConfig& cfg = {}) {
  const Domain& d = *f.domain;
  detail::check_density(f, cfg.supported.fixed_point.tol_mass);
  if (!(dist > 0)) fail(ErrorKind::invalid_argument, "distance must be positive");
  GeneralResult out;
  out.report.method = Method::general;
  {
    Error e(ErrorKind::support_distance, "f - 1 is nonzero closer than the distance bound to the boundary");
    bool any = false;
    for (std::size_t n : d.nodes) {
      if (f.values[n] == 1.0) continue;
      any = true;
      if (d.sdist[n] > -dist) e.nodes.push_back(n);
    }
    if (!e.nodes.empty()) throw e;
    if (!any) {
      out.phi = GridMap::identity(f.domain);
      out.identity_region = identity_region(d, dist);
      fill_report(out.report, out.phi, f, out.identity_region);
      return out;
    }
  }
  out.subdomain = detail::staged("exhaust", [&] { return exhaust(f.domain, dist); });
  const CollarSpec c = detail::staged("collar", [&] { return collar(out.subdomain, dist / 8); });
  const ScalarField fd = detail::restrict_to(f, out.subdomain);
  {
    const double meas = out.subdomain->measure();
    const double defect = integrate(fd) - meas;
    if (std::abs(defect) > cfg.supported.fixed_point.tol_mass * meas)
      fail(ErrorKind::inconsistent_datum, "mass on the subdomain differs from its measure by " + std::to_string(defect));
  }
  SupportedConfig sc = cfg.supported;
  sc.mollify_radius = dist / 8;
  const CollarDivSolver div(c);
  GridMap sub_phi;
  SolveReport sub_report;
  auto run_full = [&] {
    SupportedResult s = solve_supported(fd, div, sc);
    sub_phi = s.phi;
    sub_report = s.report;
    out.used = Method::full;
  };
  switch (cfg.route) {
    case Route::full: run_full(); break;
    case Route::moser: {
      MoserResult m = detail::staged("moser", [&] { return moser_solve(fd, div, sc.flow); });
      sub_phi = m.phi;
      sub_report = m.report;
      out.used = Method::moser;
      break;
    }
    case Route::fixedpoint:
    case Route::automatic: {
      try {
        FixedPointResult fp = detail::staged("fixedpoint", [&] { return fixedpoint_solve(fd, div, sc.fixed_point); });
        sub_phi = fp.phi;
        sub_report = fp.report;
        out.used = Method::fixedpoint;
      } catch (const Error& e) {
        if (cfg.route == Route::fixedpoint || e.kind() != ErrorKind::contraction_failure) throw;
        run_full();
      }
      break;
    }
  }
  out.phi = detail::extend_by_identity(sub_phi, f.domain);
  out.identity_region = identity_region(d, dist);
  out.report.iterations = sub_report.iterations;
  out.report.iterate_differences = sub_report.iterate_differences;
  out.report.warnings = sub_report.warnings;
  out.report.collar_thickness = c.thickness;
  fill_report(out.report, out.phi, f, out.identity_region);
  return out;
}

// ---------------------------------------------------------------------------
// Volume correction

struct VolumeResult {
  GridMap Psi;
  SolveReport report;
  ScalarField f;  // det of psi^{-1}, snapped and renormalized
  GeneralResult inner;
};

/// Psi = phi o psi with det(grad phi) = det(grad psi^{-1}), so Psi preserves
/// volume and agrees with psi on the identity region of phi.
inline VolumeResult volume_correct(const GridMap& psi, double dist, const GeneralConfig& cfg = {},
                                   double tol_det_boundary = 1e-2) {
  const Domain& d = *psi.domain();
  const ScalarField det = jacobian_det(psi);
  {
    Error e(ErrorKind::orientation_loss, "psi has a non-positive Jacobian determinant");
    for (std::size_t n : d.nodes)
      if (!(det.values[n] > 0)) e.nodes.push_back(n);
    if (!e.nodes.empty()) throw e;
    Error p(ErrorKind::precondition, "psi is not volume preserving near the boundary");
    for (std::size_t n : d.nodes)
      if (d.sdist[n] > -dist && std::abs(det.values[n] - 1) > tol_det_boundary) p.nodes.push_back(n);
    if (!p.nodes.empty()) throw p;
  }
  VolumeResult out;
  const GridMap inv = detail::staged("invert", [&] { return invert(psi); });
  out.f = jacobian_det(inv);
  for (std::size_t n : d.nodes)
    if (d.sdist[n] > -dist) out.f.values[n] = 1.0;
  const double meas = d.measure();
  const double defect = integrate(out.f) - meas;
  if (std::abs(defect) > cfg.supported.fixed_point.tol_mass * meas)
    fail(ErrorKind::inconsistent_datum, "mass of det grad psi^{-1} differs from the domain measure by " +
                                            std::to_string(defect));
  std::vector<double> g(out.f.values.size(), 0.0);
  for (std::size_t n : d.nodes) g[n] = out.f.values[n] - 1.0;
  detail::remove_mass(g, d.nodes, d.weights);
  for (std::size_t n : d.nodes) out.f.values[n] = 1.0 + g[n];

  out.inner = solve_general(out.f, dist, cfg);
  out.Psi = detail::staged("compose", [&] { return compose(out.inner.phi, psi); });
  out.report = out.inner.report;
  ScalarField one = ScalarField::constant(psi.domain(), 1.0, Fill::one);
  const MapCheck mc = check_map(out.Psi, one, {});
  out.report.det_residual_inf = mc.det_residual_inf;
  out.report.mass_error = mc.mass_error;
  double dev = 0.0;
  for (std::size_t n : out.inner.identity_region)
    for (int k = 0; k < 2; ++k)
      dev = std::max(dev, std::abs(out.Psi.displacement.comp[k][n] - psi.displacement.comp[k][n]));
  out.report.support_violation_inf = dev;
  return out;
}

}  // namespace jacshape
