#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "jacshape/domain.hpp"
#include "jacshape/field.hpp"

using namespace jacshape;

namespace {

DomainPtr disk(int res) { return build_domain(ShapeDescriptor::disk({0, 0}, 1), res); }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("jacshape_" + name)).string();
}

// 40x30 rectangle with a 10x8 hole.
std::string write_holed_mask() {
  GrayImage img{40, 30, std::vector<std::uint8_t>(40 * 30, 255)};
  for (int y = 10; y < 18; ++y)
    for (int x = 15; x < 25; ++x) img.pixels[y * 40 + x] = 0;
  const std::string p = temp_path("holed.pgm");
  write_pgm(p, img);
  return p;
}

bool subset(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST(Domain, DiskAreaAndShape) {
  auto d = disk(128);
  EXPECT_EQ(d->dim(), 2);
  EXPECT_EQ(d->boundary_components, 1);
  EXPECT_NEAR(d->measure(), std::numbers::pi, 0.01 * std::numbers::pi);
  EXPECT_DOUBLE_EQ(d->measure(), integrate(ScalarField::constant(d, 1.0)));
  for (std::size_t n = 0; n < d->grid.size(); ++n) EXPECT_EQ(d->inside(n), d->sdist[n] < 0);
}

TEST(Domain, IntervalHasAllNodes) {
  auto d = build_domain(ShapeDescriptor::interval(0, 1), 64);
  EXPECT_EQ(d->dim(), 1);
  EXPECT_EQ(d->nodes.size(), d->grid.size());
  EXPECT_NEAR(d->measure(), 1.0, 1e-12);
}

TEST(Domain, MaskWithHoleIsAcceptedWithWarning) {
  auto d = build_domain(ShapeDescriptor::mask(write_holed_mask()), 0);
  EXPECT_EQ(d->boundary_components, 2);
  EXPECT_FALSE(d->warnings.empty());
  EXPECT_EQ(d->nodes.size(), 40u * 30u - 80u);
}

TEST(Domain, RejectsBadInput) {
  EXPECT_THROW(build_domain(ShapeDescriptor::disk({0, 0}, 1), 4), Error);
  EXPECT_THROW(build_domain(ShapeDescriptor::interval(1, 0), 64), Error);
  EXPECT_THROW(build_domain(ShapeDescriptor::mask(temp_path("missing.pgm")), 0), Error);
  try {
    build_domain(ShapeDescriptor::disk({0, 0}, 1), 4);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::underresolved);
  }
}

TEST(Domain, DisconnectedMaskIsRejected) {
  GrayImage img{32, 32, std::vector<std::uint8_t>(32 * 32, 0)};
  for (int y = 2; y < 30; ++y) {
    for (int x = 2; x < 12; ++x) img.pixels[y * 32 + x] = 255;
    for (int x = 20; x < 30; ++x) img.pixels[y * 32 + x] = 255;
  }
  const std::string p = temp_path("split.pgm");
  write_pgm(p, img);
  try {
    build_domain(ShapeDescriptor::mask(p), 0);
    FAIL() << "expected a connectivity error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::connectivity);
  }
}

TEST(Collar, DiskBandIsAnnulus) {
  auto d = disk(64);
  const CollarSpec c = collar(d, 0.1);
  const double h = d->h();
  for (std::size_t n : d->nodes) {
    const double r = norm(d->grid.point(n));
    if (r >= 0.9 + h) {
      EXPECT_TRUE(c.contains(n));
    } else if (r <= 0.9 - h) {
      EXPECT_FALSE(c.contains(n));
    }
  }
  EXPECT_GE(c.thickness, 0.1 - 2 * h);
  EXPECT_LE(c.thickness, 0.1 + 2 * h);
}

TEST(Collar, ThinBandHoldsBoundaryAdjacentNodes) {
  auto d = disk(64);
  const CollarSpec c = collar(d, 1.01 * d->h());
  ASSERT_FALSE(c.band.empty());
  const Grid& g = d->grid;
  for (std::size_t n : d->nodes) {
    const int i = g.col(n), j = g.row(n);
    const bool edge = !d->inside(i + 1, j) || !d->inside(i - 1, j) || !d->inside(i, j + 1) || !d->inside(i, j - 1);
    if (edge) {
      EXPECT_TRUE(c.contains(n)) << n;
    }
  }
}

TEST(Collar, NestedThicknessesGiveNestedBands) {
  auto d = disk(64);
  const CollarSpec a = collar(d, 0.05), b = collar(d, 0.1), c = collar(d, 0.2);
  EXPECT_TRUE(subset(a.band, b.band));
  EXPECT_TRUE(subset(b.band, c.band));
  EXPECT_LT(a.band.size(), b.band.size());
  EXPECT_LT(b.band.size(), c.band.size());
}

TEST(Collar, ThicknessWithinTwoCells) {
  for (auto shape : {ShapeDescriptor::disk({0, 0}, 1), ShapeDescriptor::unit_square()}) {
    auto d = build_domain(shape, 64);
    for (double eps : {0.05, 0.1, 0.2}) {
      const CollarSpec c = collar(d, eps);
      EXPECT_GE(c.thickness, eps - 2 * d->h());
      EXPECT_LE(c.thickness, eps + 2 * d->h());
    }
  }
}

TEST(Collar, TooThickIsRejected) {
  try {
    collar(disk(32), 1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::collar_too_thick);
  }
}

TEST(Inradius, AnalyticShapes) {
  auto d = disk(64);
  EXPECT_NEAR(inradius(*d), 1.0, 2 * d->h());
  auto s = build_domain(ShapeDescriptor::unit_square(), 64);
  EXPECT_NEAR(inradius(*s), 0.5, 2 * s->h());
  auto i = build_domain(ShapeDescriptor::interval(0, 1), 64);
  EXPECT_NEAR(inradius(*i), 0.5, i->h());
}

TEST(Exhaust, DiskShrinksToConcentricDisk) {
  auto d = disk(64);
  auto e = exhaust(d, 0.2);
  double rmax = 0;
  for (std::size_t n : e->nodes) rmax = std::max(rmax, norm(e->grid.point(n)));
  EXPECT_NEAR(rmax, 0.9, 2 * d->h());
  EXPECT_NEAR(e->measure(), std::numbers::pi * 0.81, 0.01);
  EXPECT_TRUE(e->grid.same_as(d->grid));
}

TEST(Exhaust, MonotoneInDistance) {
  auto d = disk(64);
  auto a = exhaust(d, 0.1), b = exhaust(d, 0.3);
  EXPECT_TRUE(subset(b->nodes, a->nodes));
  EXPECT_TRUE(subset(a->nodes, d->nodes));
}

TEST(Exhaust, RemovedBandApproachesBoundary) {
  auto d = disk(64);
  std::vector<std::size_t> boundary;
  const Grid& g = d->grid;
  for (std::size_t n : d->nodes) {
    const int i = g.col(n), j = g.row(n);
    if (!d->inside(i + 1, j) || !d->inside(i - 1, j) || !d->inside(i, j + 1) || !d->inside(i, j - 1))
      boundary.push_back(n);
  }
  double prev = 1e300;
  for (double dist : {0.4, 0.2, 0.1}) {
    auto e = exhaust(d, dist);
    double haus = 0;
    for (std::size_t n : d->nodes) {
      if (e->inside(n)) continue;
      double best = 1e300;
      for (std::size_t b : boundary) {
        const Point p = g.point(n), q = g.point(b);
        best = std::min(best, std::hypot(p[0] - q[0], p[1] - q[1]));
      }
      haus = std::max(haus, best);
    }
    EXPECT_LT(haus, prev);
    prev = haus;
  }
}

TEST(Exhaust, CollarOfDomainMissesSubdomainWhenThin) {
  auto d = disk(64);
  const double dist = 0.3;
  auto e = exhaust(d, dist);
  const CollarSpec c = collar(d, 0.1);
  for (std::size_t n : c.band) EXPECT_FALSE(e->inside(n));
}

TEST(Exhaust, RepeatedExhaustionNearlyComposes) {
  auto d = disk(64);
  auto twice = exhaust(exhaust(d, 0.2), 0.1);
  auto once = exhaust(d, 0.3);
  for (std::size_t n : twice->nodes)
    EXPECT_TRUE(once->inside(n) || d->sdist[n] > -(0.15 + 2 * d->h())) << n;
}

TEST(Exhaust, TooDeepIsRejected) {
  try {
    exhaust(disk(32), 2.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::exhaustion_failure);
  }
}
