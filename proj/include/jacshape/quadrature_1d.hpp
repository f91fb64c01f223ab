#pragma once

#include <vector>

#include "jacshape/error.hpp"

namespace jacshape {

/// Fourth-order cumulative quadrature on a cell-centered 1D grid: node i sits
/// at a + (i + 1/2) h. Each sub-interval is integrated exactly for the cubic
/// through the four nearest nodes (one-sided near the ends).
struct CumulativeQuadrature {
  std::vector<double> at_nodes;  // integral from a to x_i
  double total = 0.0;            // integral from a to b
};

namespace detail {

inline void check_quadrature_size(std::size_t n) {
  if (n < 4) fail(ErrorKind::underresolved, "1D quadrature needs at least four nodes");
}

}  // namespace detail

inline CumulativeQuadrature cumulative_integral(const std::vector<double>& v, double h) {
  const std::size_t n = v.size();
  detail::check_quadrature_size(n);
  CumulativeQuadrature q;
  q.at_nodes.resize(n);
  double acc = h * (99.0 / 128 * v[0] - 187.0 / 384 * v[1] + 107.0 / 384 * v[2] - 25.0 / 384 * v[3]);
  q.at_nodes[0] = acc;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double seg;
    if (i == 0)
      seg = 3.0 / 8 * v[0] + 19.0 / 24 * v[1] - 5.0 / 24 * v[2] + 1.0 / 24 * v[3];
    else if (i + 2 == n)
      seg = 1.0 / 24 * v[n - 4] - 5.0 / 24 * v[n - 3] + 19.0 / 24 * v[n - 2] + 3.0 / 8 * v[n - 1];
    else
      seg = (-v[i - 1] + 13 * v[i] + 13 * v[i + 1] - v[i + 2]) / 24;
    acc += h * seg;
    q.at_nodes[i + 1] = acc;
  }
  q.total = acc + h * (-25.0 / 384 * v[n - 4] + 107.0 / 384 * v[n - 3] - 187.0 / 384 * v[n - 2] +
                       99.0 / 128 * v[n - 1]);
  return q;
}

/// Per-node weights of the total integral of cumulative_integral, obtained
/// by probing the (linear) rule with unit vectors.
inline std::vector<double> total_weights(std::size_t n, double h) {
  detail::check_quadrature_size(n);
  std::vector<double> w(n, 0.0), e(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    e[k] = 1.0;
    w[k] = cumulative_integral(e, h).total;
    e[k] = 0.0;
  }
  return w;
}

}  // namespace jacshape
