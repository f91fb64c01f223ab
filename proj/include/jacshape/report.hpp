#pragma once

#include <span>
#include <string>
#include <vector>

#include "jacshape/field.hpp"
#include "jacshape/grid_map.hpp"

namespace jacshape {

enum class Method { oned, moser, fixedpoint, full, general };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::oned: return "oned";
    case Method::moser: return "moser";
    case Method::fixedpoint: return "fixedpoint";
    case Method::full: return "full";
    case Method::general: return "general";
  }
  return "unknown";
}

struct SolveReport {
  Method method = Method::oned;
  double det_residual_inf = 0.0;       // max |det grad phi - f| over the mask
  double support_violation_inf = 0.0;  // max |phi - id| over the identity region
  double mass_error = 0.0;             // |integral det grad phi - integral f|
  int iterations = 0;
  double collar_thickness = 0.0;
  double norm_ratio = 0.0;             // C^{1,1/2} of phi - id over C^{0,1/2} of f - 1

  // Diagnostics (not part of the serialized report).
  std::vector<std::string> warnings;
  std::vector<double> iterate_differences;
};

/// The residual part of a report, recomputed from (phi, f, identity region).
struct MapCheck {
  double det_residual_inf = 0.0;
  double support_violation_inf = 0.0;
  double mass_error = 0.0;
  ScalarField det;
};

inline MapCheck check_map(const GridMap& phi, const ScalarField& f, std::span<const std::size_t> identity_region) {
  if (!phi.grid().same_as(f.grid())) fail(ErrorKind::shape_mismatch, "map and density live on different grids");
  MapCheck c;
  c.det = jacobian_det(phi);
  for (std::size_t n : f.domain->nodes)
    c.det_residual_inf = std::max(c.det_residual_inf, std::abs(c.det.values[n] - f.values[n]));
  c.support_violation_inf = max_abs(phi.displacement, identity_region);
  c.mass_error = std::abs(integrate(c.det) - integrate(f));
  return c;
}

inline constexpr double norm_alpha = 0.5;

inline double norm_ratio(const GridMap& phi, const ScalarField& f) {
  ScalarField g = f;
  for (double& v : g.values) v -= 1.0;
  const double denom = holder_norm(g, 0, norm_alpha).value;
  if (denom == 0.0) return 0.0;
  return holder_norm(phi.displacement, 1, norm_alpha).value / denom;
}

inline void fill_report(SolveReport& r, const GridMap& phi, const ScalarField& f,
                        std::span<const std::size_t> identity_region) {
  const MapCheck c = check_map(phi, f, identity_region);
  r.det_residual_inf = c.det_residual_inf;
  r.support_violation_inf = c.support_violation_inf;
  r.mass_error = c.mass_error;
  r.norm_ratio = norm_ratio(phi, f);
}

}  // namespace jacshape
