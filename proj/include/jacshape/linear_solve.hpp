#pragma once

#include <cmath>
#include <vector>

namespace jacshape {

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::vector<double> history;  // relative residual, every iteration
};

/// Diagonally preconditioned conjugate gradients for a symmetric positive
/// (semi-)definite operator given matrix-free as apply(x, y): y = A x.
/// For singular A the right-hand side must lie in the range.
template <class Apply>
CgResult conjugate_gradient(Apply&& apply, const std::vector<double>& b, const std::vector<double>& diag,
                            double rtol, int max_iter) {
  const std::size_t n = b.size();
  CgResult res;
  res.x.assign(n, 0.0);
  double bnorm = 0.0;
  for (double v : b) bnorm += v * v;
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  std::vector<double> r(b), z(n), p(n), q(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = r[k] / diag[k];
  p = z;
  double rz = 0.0;
  for (std::size_t k = 0; k < n; ++k) rz += r[k] * z[k];
  for (int it = 1; it <= max_iter; ++it) {
    apply(p, q);
    double pq = 0.0;
    for (std::size_t k = 0; k < n; ++k) pq += p[k] * q[k];
    if (pq <= 0.0) break;
    const double alpha = rz / pq;
    double rr = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      res.x[k] += alpha * p[k];
      r[k] -= alpha * q[k];
      rr += r[k] * r[k];
    }
    res.iterations = it;
    res.relative_residual = std::sqrt(rr) / bnorm;
    res.history.push_back(res.relative_residual);
    if (res.relative_residual <= rtol) {
      res.converged = true;
      return res;
    }
    double rz_new = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      z[k] = r[k] / diag[k];
      rz_new += r[k] * z[k];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
  }
  return res;
}

}  // namespace jacshape
