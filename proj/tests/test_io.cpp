#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "jacshape/fixtures.hpp"
#include "jacshape/io.hpp"

using namespace jacshape;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("jacshape_io_" + name)).string();
}

DomainPtr disk(int res) { return build_domain(ShapeDescriptor::disk({0, 0}, 1), res); }

ScalarField noisy(const DomainPtr& d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  ScalarField f = ScalarField::constant(d, 1.0, Fill::one);
  for (std::size_t n : d->nodes) f.values[n] = u(rng) * std::numbers::pi;
  return f;
}

}  // namespace

TEST(Base64, FrozenEncoding) {
  const std::vector<double> v{1.0, -0.5, std::numbers::pi, 1e-300};
  EXPECT_EQ(io::encode_doubles(v), "AAAAAAAA8D8AAAAAAADgvxgtRFT7IQlAWfP4wh9upQE=");
  EXPECT_EQ(io::decode_doubles("AAAAAAAA8D8AAAAAAADgvxgtRFT7IQlAWfP4wh9upQE=", 4), v);
}

TEST(Base64, RoundTripAndLengthChecks) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (std::size_t len : {0u, 1u, 2u, 3u, 17u}) {
    std::vector<double> v(len);
    for (double& x : v) x = u(rng);
    EXPECT_EQ(io::decode_doubles(io::encode_doubles(v), len), v);
  }
  EXPECT_THROW(io::decode_doubles(io::encode_doubles({1.0, 2.0}), 3), Error);
  EXPECT_THROW(io::decode_doubles("abc", 1), Error);
}

TEST(FieldIo, JsonRoundTripIsBitExact) {
  auto d = disk(32);
  const ScalarField f = noisy(d, 1);
  const std::string p = temp_path("f.json");
  io::write_scalar(p, f);
  const ScalarField g = io::read_scalar(p, nullptr, Fill::one);
  EXPECT_EQ(g.values, f.values);
  EXPECT_TRUE(g.grid().same_as(d->grid));
}

TEST(FieldIo, CsvRoundTripIsBitExact) {
  auto d = disk(32);
  const ScalarField f = noisy(d, 2);
  const std::string p = temp_path("f.csv");
  io::write_scalar(p, f);
  EXPECT_EQ(io::read_scalar(p, d, Fill::one).values, f.values);
  VectorField v = VectorField::zeros(d);
  v.comp[0] = f.values;
  v.comp[1] = noisy(d, 3).values;
  const std::string q = temp_path("v.csv");
  io::write_vector(q, v);
  const io::FieldData back = io::read_field_data(q, d);
  ASSERT_EQ(back.comps.size(), 2u);
  EXPECT_EQ(back.comps[0], v.comp[0]);
  EXPECT_EQ(back.comps[1], v.comp[1]);
}

TEST(FieldIo, GridMismatchIsShapeError) {
  const std::string p = temp_path("coarse.csv");
  io::write_scalar(p, ScalarField::constant(disk(16), 1.0));
  try {
    io::read_scalar(p, disk(32), Fill::one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape_mismatch);
  }
}

TEST(FieldIo, CsvWithoutDomainIsRejected) {
  const std::string p = temp_path("nodomain.csv");
  io::write_scalar(p, ScalarField::constant(disk(16), 1.0));
  EXPECT_THROW(io::read_scalar(p, nullptr, Fill::one), Error);
  try {
    io::read_scalar(temp_path("absent.json"), nullptr, Fill::one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

TEST(MapIo, RoundTripWithReport) {
  auto d = disk(32);
  const GridMap phi = sample_map(d, RadialSqueeze{});
  SolveReport r;
  r.method = Method::full;
  r.det_residual_inf = 1.25e-3;
  r.iterations = 4;
  r.norm_ratio = 0.7;
  const std::string p = temp_path("phi.json");
  io::write_map(p, phi, &r);
  const io::MapFile m = io::read_map(p);
  for (int k = 0; k < 2; ++k) EXPECT_EQ(m.phi.displacement.comp[k], phi.displacement.comp[k]);
  EXPECT_EQ(m.phi.interp, phi.interp);
  const SolveReport back = io::report_from_json(m.report);
  EXPECT_EQ(back.method, Method::full);
  EXPECT_EQ(back.det_residual_inf, r.det_residual_inf);
  EXPECT_EQ(back.iterations, 4);
  EXPECT_EQ(back.norm_ratio, 0.7);
}

TEST(ReportIo, FixedFieldOrder) {
  const io::Json j = io::report_json(SolveReport{});
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"method", "det_residual_inf", "support_violation_inf", "mass_error",
                                            "iterations", "collar_thickness", "norm_ratio"}));
}

TEST(DomainIo, DescriptorRoundTrip) {
  auto d = disk(40);
  const std::string p = temp_path("domain.json");
  io::write_domain(p, *d);
  auto e = io::read_domain(p);
  EXPECT_TRUE(e->grid.same_as(d->grid));
  EXPECT_EQ(e->mask, d->mask);
}

TEST(NodeIo, RoundTripAndValidation) {
  auto d = disk(32);
  const std::vector<std::size_t> nodes{d->nodes[0], d->nodes[5], d->nodes.back()};
  const std::string p = temp_path("nodes.json");
  io::write_nodes(p, *d, nodes);
  EXPECT_EQ(io::read_nodes(p, *d), nodes);
  io::write_nodes(p, *d, {0});  // corner of the box, outside the disk
  EXPECT_THROW(io::read_nodes(p, *d), Error);
}

TEST(Heatmap, ScaleSidecarAndBlackImage) {
  auto d = disk(16);
  const std::string p = temp_path("heat.pgm");
  const io::HeatmapScale s = io::write_heatmap(p, *d, std::vector<double>(d->grid.size(), 0.0));
  EXPECT_EQ(s.min, 0.0);
  EXPECT_EQ(s.max, 0.0);
  const GrayImage img = read_pgm(p);
  for (auto px : img.pixels) EXPECT_EQ(px, 0);
  const io::Json side = io::Json::parse(io::detail::read_text(p + ".json"));
  EXPECT_EQ(side["width"], d->grid.nx);
  EXPECT_EQ(side["height"], d->grid.ny);
}

TEST(Heatmap, TopRowIsLastGridRow) {
  auto d = build_domain(ShapeDescriptor::unit_square(), 16);
  std::vector<double> v(d->grid.size(), 0.0);
  for (int i = 0; i < d->grid.nx; ++i) v[d->grid.index(i, d->grid.ny - 1)] = 1.0;
  const std::string p = temp_path("rows.pgm");
  io::write_heatmap(p, *d, v);
  const GrayImage img = read_pgm(p);
  for (int i = 0; i < img.width; ++i) {
    EXPECT_EQ(img.pixels[i], 255);
    EXPECT_EQ(img.pixels[static_cast<std::size_t>(img.height - 1) * img.width + i], 0);
  }
}
