#pragma once

#include <functional>
#include <string>
#include <vector>

#include "jacshape/div_solver.hpp"
#include "jacshape/grid_map.hpp"
#include "jacshape/interpolate.hpp"
#include "jacshape/report.hpp"

namespace jacshape {

enum class Integrator { rk4 };

struct FlowConfig {
  int time_steps = 32;
  Integrator integrator = Integrator::rk4;
  Interp interp = Interp::bicubic;
  bool clamp_to_domain = true;
  double tol_mass = 1e-4;  // relative to meas
  double tol_det = 0.0;    // expected det residual; > 0 enables the flow-accuracy check at 10x
  std::function<void(int step, double t, const GridMap& eta)> dump;
};

/// w_t = -v / (t f + 1 - t), node-wise.
inline VectorField moser_velocity(const ScalarField& f, const VectorField& v, double t) {
  if (!(t >= 0 && t <= 1)) fail(ErrorKind::invalid_argument, "flow time must lie in [0, 1]");
  VectorField w = VectorField::zeros(v.domain);
  for (std::size_t n : v.domain->nodes) {
    const double den = t * f.values[n] + 1 - t;
    if (!(den > 0)) {
      Error e(ErrorKind::positivity, "t f + 1 - t is not positive");
      e.nodes.push_back(n);
      throw e;
    }
    for (int k = 0; k < v.dim(); ++k) w.comp[k][n] = -v.comp[k][n] / den;
  }
  return w;
}

namespace detail {

inline void check_density(const ScalarField& f, double tol_mass_rel) {
  if (f.fill != Fill::one) fail(ErrorKind::precondition, "density must extend by one (fill one)");
  Error neg(ErrorKind::positivity, "density is not positive");
  for (std::size_t n : f.domain->nodes)
    if (!(f.values[n] > 0)) neg.nodes.push_back(n);
  if (!neg.nodes.empty()) throw neg;
  const double meas = f.domain->measure();
  const double defect = integrate(f) - meas;
  if (std::abs(defect) > tol_mass_rel * meas)
    fail(ErrorKind::inconsistent_datum, "density mass differs from the domain measure by " + std::to_string(defect));
}

inline void check_one_on(const ScalarField& f, std::span<const std::size_t> nodes, const std::string& where) {
  Error e(ErrorKind::precondition, "density differs from one on the " + where);
  for (std::size_t n : nodes)
    if (f.values[n] != 1.0) e.nodes.push_back(n);
  if (!e.nodes.empty()) throw e;
}

inline ScalarField minus_one(const ScalarField& f) {
  ScalarField h = ScalarField::constant(f.domain, 0.0);
  for (std::size_t n : f.domain->nodes) h.values[n] = f.values[n] - 1.0;
  return h;
}

}  // namespace detail

struct MoserResult {
  GridMap phi;
  SolveReport report;
  GridMap eta;    // time-one flow map, phi = eta^{-1}
  VectorField v;  // div v = f - 1, v = 0 on the band
};

/// Moser's flow: v solves div v = f - 1 with v = 0 on the band; the flow eta
/// of w_t is integrated from 0 to 1 and phi = eta_1^{-1}.
inline MoserResult moser_solve(const ScalarField& f, const CollarDivSolver& div, const FlowConfig& cfg = {}) {
  const CollarSpec& c = div.collar();
  if (cfg.time_steps < 8) fail(ErrorKind::invalid_argument, "time_steps must be at least 8");
  detail::check_density(f, cfg.tol_mass);
  detail::check_one_on(f, c.band, "collar band");
  const Domain& d = *f.domain;
  const Grid& g = d.grid;

  MoserResult out;
  out.report.method = Method::moser;
  out.report.collar_thickness = c.thickness;
  out.report.iterations = cfg.time_steps;
  out.v = div.solve(detail::minus_one(f)).u;

  const std::vector<std::size_t>& nodes = d.nodes;
  std::vector<Point> pos(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) pos[k] = g.point(nodes[k]);

  auto velocity = [&](const Point& p, double t) {
    const Sample fs = interpolate(g, f.values, 1.0, p, cfg.interp);
    const double den = t * fs.value + 1 - t;
    if (!(den > 0)) fail(ErrorKind::positivity, "interpolated t f + 1 - t is not positive along a trajectory");
    Point w{-interpolate(g, out.v.comp[0], 0.0, p, cfg.interp).value / den, 0.0};
    if (g.dim == 2) w[1] = -interpolate(g, out.v.comp[1], 0.0, p, cfg.interp).value / den;
    return w;
  };
  auto advance = [&](const Point& p, const Point& w, double s) {
    Point q{p[0] + s * w[0], p[1] + s * w[1]};
    return cfg.clamp_to_domain ? detail::clamp_to_box(g, q) : q;
  };
  auto snapshot = [&]() {
    GridMap eta{VectorField::zeros(f.domain), cfg.interp};
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const Point x = g.point(nodes[k]);
      eta.displacement.comp[0][nodes[k]] = pos[k][0] - x[0];
      if (g.dim == 2) eta.displacement.comp[1][nodes[k]] = pos[k][1] - x[1];
    }
    return eta;
  };

  const double dt = 1.0 / cfg.time_steps;
  if (cfg.dump) cfg.dump(0, 0.0, snapshot());
  for (int s = 0; s < cfg.time_steps; ++s) {
    const double t = s * dt;
    for (Point& p : pos) {
      const Point k1 = velocity(p, t);
      const Point k2 = velocity(advance(p, k1, 0.5 * dt), t + 0.5 * dt);
      const Point k3 = velocity(advance(p, k2, 0.5 * dt), t + 0.5 * dt);
      const Point k4 = velocity(advance(p, k3, dt), t + dt);
      p = advance(p, {k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0], k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]}, dt / 6);
    }
    if (cfg.dump) cfg.dump(s + 1, (s + 1) * dt, snapshot());
  }
  std::size_t escaped = 0;
  for (const Point& p : pos)
    if (interpolate(g, d.sdist, 0.0, p, Interp::bilinear).value > 2 * g.h) ++escaped;
  if (escaped > 0)
    out.report.warnings.push_back("trajectory-escape: " + std::to_string(escaped) +
                                  " trajectories end more than 2h outside the mask");

  out.eta = snapshot();
  out.phi = invert(out.eta);
  fill_report(out.report, out.phi, f, c.band);
  if (cfg.tol_det > 0 && out.report.det_residual_inf > 10 * cfg.tol_det)
    fail(ErrorKind::flow_accuracy, "determinant residual " + std::to_string(out.report.det_residual_inf) +
                                       " exceeds 10x the expected " + std::to_string(cfg.tol_det));
  return out;
}

inline MoserResult moser_solve(const ScalarField& f, const CollarSpec& c, const FlowConfig& cfg = {}) {
  return moser_solve(f, CollarDivSolver(c), cfg);
}

}  // namespace jacshape
