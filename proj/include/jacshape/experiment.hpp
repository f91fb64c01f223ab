#pragma once

// Collar-thickness sweep of the fixed-point constant.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "jacshape/fixtures.hpp"
#include "jacshape/jacobian_solver.hpp"

namespace jacshape {

struct ExperimentRecord {
  double collar_thickness = 0.0;  // requested delta
  double band_thickness = 0.0;    // measured
  double norm_ratio = 0.0;
  double epsilon_gate_max = 0.0;  // largest ladder amplitude that converged; 0 if none
  double det_residual = 0.0;
  int iterations = 0;
  bool ok = false;
  std::string error;
};

struct CollarExperimentConfig {
  int resolution = 64;
  std::vector<double> thicknesses{0.3, 0.2, 0.15, 0.1, 0.075, 0.05};
  double template_radius = 0.4;  // supp(f - 1) in |x| <= template_radius
  double template_amplitude = 0.05;
  std::vector<double> amplitude_ladder{0.01, 0.02, 0.05, 0.1, 0.2, 0.4};
  FixedPointConfig fixed_point{.gate = false};
};

struct CollarExperiment {
  std::vector<ExperimentRecord> records;
  double spearman_rho = 0.0;  // norm_ratio against 1/delta over successful rows
  int successful = 0;
};

/// Average ranks (ties share the mean rank).
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation: Pearson correlation of average ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return 0.0;
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
}

inline CollarExperiment run_collar_experiment(const CollarExperimentConfig& cfg = {}) {
  const DomainPtr d = build_domain(ShapeDescriptor::disk({0, 0}, 1), cfg.resolution);
  CollarExperiment out;
  std::vector<double> inv, ratio;
  for (double delta : cfg.thicknesses) {
    ExperimentRecord rec;
    rec.collar_thickness = delta;
    try {
      const CollarSpec c = collar(d, delta);
      rec.band_thickness = c.thickness;
      const CollarDivSolver div(c);
      const ScalarField f = radial_density(d, cfg.template_amplitude, cfg.template_radius);
      const FixedPointResult fp = fixedpoint_solve(f, div, cfg.fixed_point);
      rec.norm_ratio = fp.report.norm_ratio;
      rec.det_residual = fp.report.det_residual_inf;
      rec.iterations = fp.report.iterations;
      for (double a : cfg.amplitude_ladder) {
        try {
          fixedpoint_solve(radial_density(d, a, cfg.template_radius), div, cfg.fixed_point);
          rec.epsilon_gate_max = a;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::contraction_failure && e.kind() != ErrorKind::positivity) throw;
          break;
        }
      }
      rec.ok = true;
      inv.push_back(1 / delta);
      ratio.push_back(rec.norm_ratio);
      ++out.successful;
    } catch (const Error& e) {
      rec.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    out.records.push_back(rec);
  }
  out.spearman_rho = spearman(inv, ratio);
  return out;
}

}  // namespace jacshape
