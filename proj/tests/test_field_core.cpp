#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "jacshape/field.hpp"
#include "jacshape/interpolate.hpp"
#include "jacshape/quadrature_1d.hpp"

using namespace jacshape;
using std::numbers::pi;

namespace {

DomainPtr square(int res) { return build_domain(ShapeDescriptor::unit_square(), res); }
DomainPtr disk(int res) { return build_domain(ShapeDescriptor::disk({0, 0}, 1), res); }
DomainPtr interval(int res) { return build_domain(ShapeDescriptor::interval(0, 1), res); }

double gradient_error(int res) {
  auto d = square(res);
  auto f = ScalarField::sample(d, [](const Point& p) { return std::sin(pi * p[0]) * std::sin(pi * p[1]); });
  const VectorField g = gradient(f);
  double err = 0;
  for (std::size_t n : d->nodes) {
    const Point p = d->grid.point(n);
    err = std::max(err, std::abs(g.comp[0][n] - pi * std::cos(pi * p[0]) * std::sin(pi * p[1])));
    err = std::max(err, std::abs(g.comp[1][n] - pi * std::sin(pi * p[0]) * std::cos(pi * p[1])));
  }
  return err;
}

}  // namespace

TEST(Gradient, ConstantIsZero) {
  auto d = disk(32);
  const VectorField g = gradient(ScalarField::constant(d, 3.5));
  EXPECT_EQ(max_abs(g, d->nodes), 0.0);
}

TEST(Gradient, ExactOnAffineFields) {
  auto d = square(64);
  const VectorField g = gradient(ScalarField::sample(d, [](const Point& p) { return p[0]; }));
  for (std::size_t n : d->nodes) {
    EXPECT_NEAR(g.comp[0][n], 1.0, 1e-12);
    EXPECT_NEAR(g.comp[1][n], 0.0, 1e-12);
  }
}

TEST(Gradient, SecondOrderUnderRefinement) {
  const double e1 = gradient_error(32), e2 = gradient_error(64);
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
}

TEST(Divergence, ConstantFieldIsZero) {
  auto d = disk(32);
  const ScalarField s = divergence(VectorField::sample(d, [](const Point&) { return Point{0.3, -2.0}; }));
  EXPECT_LE(max_abs(s), 1e-13);
}

TEST(Divergence, RadialFieldIsTwo) {
  auto d = disk(32);
  const ScalarField s = divergence(VectorField::sample(d, [](const Point& p) { return p; }));
  for (std::size_t n : d->nodes) EXPECT_NEAR(s.values[n], 2.0, 1e-12);
}

TEST(Divergence, RotatedGradientIsDivergenceFree) {
  for (int res : {32, 64}) {
    auto d = square(res);
    auto gamma = ScalarField::sample(d, [](const Point& p) { return std::exp(p[0]) * std::cos(p[1]); });
    const ScalarField s = divergence(rotated_gradient(gamma));
    const Grid& g = d->grid;
    for (std::size_t n : d->nodes) {
      const int i = g.col(n), j = g.row(n);
      bool full = true;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) full = full && d->inside(i + di, j + dj);
      if (full) {
        EXPECT_NEAR(s.values[n], 0.0, 1e-9);
      }
    }
  }
}

TEST(Divergence, AdjointToGradientOnCompactSupport) {
  auto d = disk(48);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  const double h = d->h();
  for (int trial = 0; trial < 5; ++trial) {
    ScalarField p = ScalarField::constant(d, 0.0);
    VectorField v = VectorField::zeros(d);
    for (std::size_t n : d->nodes)
      if (d->sdist[n] < -3 * h) {
        p.values[n] = u(rng);
        v.comp[0][n] = u(rng);
        v.comp[1][n] = u(rng);
      }
    const VectorField gp = gradient(p);
    const ScalarField dv = divergence(v);
    double lhs = 0, np = 0, nv = 0;
    for (std::size_t n : d->nodes) {
      lhs += gp.comp[0][n] * v.comp[0][n] + gp.comp[1][n] * v.comp[1][n] + p.values[n] * dv.values[n];
      np += p.values[n] * p.values[n];
      nv += v.comp[0][n] * v.comp[0][n] + v.comp[1][n] * v.comp[1][n];
    }
    const double tol = 10 * std::numeric_limits<double>::epsilon() * d->nodes.size();
    EXPECT_LE(std::abs(lhs), tol * std::sqrt(np * nv) / h);
  }
}

TEST(Integrate, UnitSquareConstant) {
  EXPECT_NEAR(integrate(ScalarField::constant(square(64), 1.0)), 1.0, 1e-12);
}

TEST(Integrate, ZeroField) { EXPECT_EQ(integrate(ScalarField::constant(disk(32), 0.0)), 0.0); }

TEST(Integrate, DiskArea) {
  const double a = integrate(ScalarField::constant(disk(128), 1.0));
  EXPECT_LT(std::abs(a - pi) / pi, 2e-3);
  const double a64 = integrate(ScalarField::constant(disk(64), 1.0));
  EXPECT_LE(std::abs(a - pi), std::abs(a64 - pi) + 1e-12);
}

TEST(Holder, ConstantHasZeroSeminorm) {
  auto d = disk(32);
  EXPECT_EQ(holder_seminorm(ScalarField::constant(d, 2.0), 0.5, d->nodes), 0.0);
}

TEST(Holder, LipschitzConstantOfIdentity) {
  auto d = interval(128);
  const ScalarField f = ScalarField::sample(d, [](const Point& p) { return p[0]; });
  EXPECT_NEAR(holder_seminorm(f, 1.0, d->nodes), 1.0, 1e-12);
}

TEST(Holder, SquareRootHalfSeminormMatchesBruteForce) {
  auto d = interval(256);
  const ScalarField f = ScalarField::sample(d, [](const Point& p) { return std::sqrt(p[0]); });
  const double v = holder_seminorm(f, 0.5, d->nodes);
  EXPECT_NEAR(v, 0.9566991677660519, 1e-12);
  EXPECT_LT(v, 1.0);
  const ScalarField coarse = ScalarField::sample(interval(64), [](const Point& p) { return std::sqrt(p[0]); });
  EXPECT_LT(holder_seminorm(coarse, 0.5, coarse.domain->nodes), v);
}

TEST(Holder, NormOfOneIsOne) {
  auto d = disk(32);
  EXPECT_DOUBLE_EQ(holder_norm(ScalarField::constant(d, 1.0), 0, 0.5).value, 1.0);
  EXPECT_DOUBLE_EQ(holder_norm(ScalarField::constant(d, 1.0), 1, 0.5).value, 1.0);
}

TEST(Holder, SmallSineNormMatchesExhaustiveScan) {
  auto d = square(64);
  const ScalarField f = ScalarField::sample(
      d, [](const Point& p) { return 1 + 0.01 * std::sin(pi * p[0]) * std::sin(pi * p[1]); });
  const HolderEstimate full = holder_norm(f, 0, 0.5, 20'000'000);
  EXPECT_TRUE(full.exhaustive);
  EXPECT_NEAR(full.value, 1.0248302044725819, 1e-12);
  EXPECT_GT(full.value, 1.01);
  EXPECT_LT(full.value, 1.01 + 0.01 * pi * std::sqrt(2.0) + 1e-3);
  const HolderEstimate sub = holder_norm(f, 0, 0.5, 100'000);
  EXPECT_FALSE(sub.exhaustive);
  EXPECT_LE(sub.value, full.value);
}

TEST(Holder, UnsupportedOrder) {
  EXPECT_THROW(holder_norm(ScalarField::constant(disk(32), 1.0), 2, 0.5), Error);
}

TEST(Mollify, OneIsFixed) {
  auto d = disk(48);
  const ScalarField m = mollify(ScalarField::constant(d, 1.0, Fill::one), 0.1);
  for (std::size_t n : d->nodes) EXPECT_EQ(m.values[n], 1.0);
}

namespace {

ScalarField inner_bump(const DomainPtr& d) {
  return ScalarField::sample(
      d,
      [](const Point& p) {
        const double r2 = (p[0] * p[0] + p[1] * p[1]) / 0.09;
        return r2 < 1 ? 1 + 0.3 * std::pow(1 - r2, 3) : 1.0;
      },
      Fill::one);
}

}  // namespace

TEST(Mollify, PreservesSupportAndMass) {
  auto d = disk(64);
  const ScalarField f = inner_bump(d);
  const ScalarField m = mollify(f, 0.1);
  for (std::size_t n : d->nodes)
    if (d->sdist[n] > -0.1) {
      EXPECT_EQ(m.values[n], 1.0);
    }
  EXPECT_NEAR(integrate(m), integrate(f), 1e-10);
}

TEST(Mollify, ApproachesFieldAsRadiusShrinks) {
  auto d = disk(96);
  const ScalarField f = inner_bump(d);
  double prev = 1e300;
  for (double r : {0.2, 0.1, 0.05}) {
    const ScalarField m = mollify(f, r);
    double e = 0;
    for (std::size_t n : d->nodes) e = std::max(e, std::abs(m.values[n] - f.values[n]));
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(Mollify, RejectsNonDensityAndTinyRadius) {
  auto d = disk(32);
  EXPECT_THROW(mollify(ScalarField::constant(d, 1.0), 0.2), Error);
  EXPECT_THROW(mollify(ScalarField::constant(d, 1.0, Fill::one), d->h()), Error);
}

TEST(Quadrature1D, CubicsAreExact) {
  const int n = 40;
  const double h = 1.0 / n;
  std::vector<double> v(n);
  auto f = [](double x) { return 1 - 2 * x + 3 * x * x - 4 * x * x * x; };
  auto F = [](double x) { return x - x * x + x * x * x - x * x * x * x; };
  for (int i = 0; i < n; ++i) v[i] = f((i + 0.5) * h);
  const CumulativeQuadrature q = cumulative_integral(v, h);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(q.at_nodes[i], F((i + 0.5) * h), 1e-14);
  EXPECT_NEAR(q.total, F(1.0), 1e-14);
  const auto w = total_weights(n, h);
  double s = 0;
  for (double x : w) s += x;
  EXPECT_NEAR(s, 1.0, 1e-14);
}

TEST(Interpolate, BilinearReproducesAffine) {
  auto d = square(32);
  const ScalarField f = ScalarField::sample(d, [](const Point& p) { return 2 * p[0] - 3 * p[1] + 0.5; });
  for (const Point p : {Point{0.31, 0.77}, Point{0.5, 0.5}, Point{0.1234, 0.9}}) {
    const Sample s = interpolate(d->grid, f.values, 0.0, p, Interp::bilinear);
    EXPECT_NEAR(s.value, 2 * p[0] - 3 * p[1] + 0.5, 1e-13);
    EXPECT_NEAR(s.dx, 2.0, 1e-12);
    EXPECT_NEAR(s.dy, -3.0, 1e-12);
  }
}
