#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "sssbathy/error.hpp"
#include "sssbathy/raster.hpp"
#include "sssbathy/terrain.hpp"

using namespace sssbathy;

namespace {

SpectrumParams flat(double offset) {
  SpectrumParams s;
  s.amplitude = 0.0;
  s.offset = offset;
  return s;
}

std::filesystem::path temp_dir(const char* name) {
  auto p = std::filesystem::temp_directory_path() / "sssbathy_tests" / name;
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Terrain, FlatRequest) {
  const Heightfield hf = generate_heightfield({0, 0, 20, 10}, 0.5, flat(-12.0), 1);
  EXPECT_EQ(hf.spec().n_cols, 40u);
  EXPECT_EQ(hf.spec().n_rows, 20u);
  for (double v : hf.values().data()) EXPECT_EQ(v, -12.0);
}

TEST(Terrain, SameSeedSameGrid) {
  const SpectrumParams s;
  const Heightfield a = generate_heightfield({0, 0, 50, 50}, 0.5, s, 42);
  const Heightfield b = generate_heightfield({0, 0, 50, 50}, 0.5, s, 42);
  const Heightfield c = generate_heightfield({0, 0, 50, 50}, 0.5, s, 43);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NE(a.values(), c.values());
}

TEST(Terrain, DepthBand) {
  SpectrumParams s;
  s.band_low = -21.0;
  s.band_high = -9.0;
  const Heightfield hf = generate_heightfield({0, 0, 120, 80}, 0.5, s, 3);
  const auto [lo, hi] = std::minmax_element(hf.values().data().begin(), hf.values().data().end());
  EXPECT_NEAR(*lo, -21.0, 1e-6);
  EXPECT_NEAR(*hi, -9.0, 1e-6);
}

TEST(Terrain, DegenerateRegion) {
  EXPECT_THROW(generate_heightfield({0, 0, 0, 10}, 0.5, SpectrumParams{}, 1), ParameterError);
  EXPECT_THROW(generate_heightfield({0, 0, 10, 10}, 0.0, SpectrumParams{}, 1), ParameterError);
}

TEST(Terrain, BoulderPeak) {
  const Heightfield hf = generate_heightfield({0, 0, 20, 20}, 0.5, flat(-12.0), 1);
  Feature b;
  b.kind = FeatureKind::Boulder;
  b.cx = 10.25;  // a cell center
  b.cy = 10.25;
  b.radius = 2.0;
  b.height = 1.0;
  const Heightfield out = add_features(hf, {b}, 0);
  const auto [lo, hi] = std::minmax_element(out.values().data().begin(), out.values().data().end());
  EXPECT_DOUBLE_EQ(*hi, -11.0);
  EXPECT_DOUBLE_EQ(*lo, -12.0);
  EXPECT_DOUBLE_EQ(out.at(20, 20), -11.0);
}

TEST(Terrain, EmptyFeatureListIsIdentity) {
  const Heightfield hf = generate_heightfield({0, 0, 30, 30}, 0.5, SpectrumParams{}, 9);
  EXPECT_EQ(add_features(hf, {}, 5).values(), hf.values());
}

TEST(Terrain, OverlappingBumpsSum) {
  const Heightfield hf = generate_heightfield({0, 0, 30, 30}, 0.5, flat(-15.0), 1);
  Feature a{FeatureKind::Hill, 12.0, 14.0, 6.0, 2.0};
  Feature b{FeatureKind::Hill, 16.0, 15.0, 5.0, 1.5};
  const Heightfield out = add_features(hf, {a, b}, 0);
  const auto& s = out.spec();
  for (std::size_t r = 0; r < s.n_rows; ++r) {
    for (std::size_t c = 0; c < s.n_cols; ++c) {
      const double x = s.center_x(c), y = s.center_y(r);
      auto bump = [&](const Feature& f) {
        const double d = std::hypot(x - f.cx, y - f.cy);
        return d >= f.radius ? 0.0 : f.height * 0.5 * (1.0 + std::cos(std::numbers::pi * d / f.radius));
      };
      EXPECT_NEAR(out.at(c, r), -15.0 + bump(a) + bump(b), 1e-12);
    }
  }
}

TEST(Terrain, FeaturesAboveSurfaceClipped) {
  const Heightfield hf = generate_heightfield({0, 0, 10, 10}, 0.5, flat(-1.0), 1);
  Feature h{FeatureKind::Hill, 5.0, 5.0, 3.0, 4.0};
  const Heightfield out = add_features(hf, {h}, 0);
  for (double v : out.values().data()) EXPECT_LE(v, 0.0);
  EXPECT_EQ(*std::max_element(out.values().data().begin(), out.values().data().end()), 0.0);
}

TEST(Terrain, FeatureOutsideGridRejected) {
  const Heightfield hf = generate_heightfield({0, 0, 10, 10}, 0.5, flat(-10.0), 1);
  EXPECT_THROW(add_features(hf, {Feature{FeatureKind::Hill, 50.0, 5.0, 3.0, 1.0}}, 0), ParameterError);
}

TEST(Terrain, SampleDepth) {
  Heightfield hf(GridSpec{0, 0, 1.0, 2, 2}, -10.0);
  hf.at(1, 0) = -12.0;
  EXPECT_DOUBLE_EQ(*sample_depth(hf, 0.5, 0.5), -10.0);
  EXPECT_DOUBLE_EQ(*sample_depth(hf, 1.5, 0.5), -12.0);
  EXPECT_DOUBLE_EQ(*sample_depth(hf, 1.0, 0.5), -11.0);
  EXPECT_FALSE(sample_depth(hf, 5.0, 0.5).has_value());
  EXPECT_FALSE(sample_depth(hf, 0.1, 0.5).has_value());
  hf.at(0, 1) = kNoData;
  EXPECT_FALSE(sample_depth(hf, 0.7, 0.7).has_value());
}

TEST(Terrain, LawnmowerLineCountAndHeadings) {
  const Heightfield hf = generate_heightfield({-10, -10, 120, 120}, 0.5, SpectrumParams{}, 4);
  LawnmowerPlan plan;
  plan.region = {0, 0, 100, 100};
  plan.line_spacing = 25.0;
  const auto lines = plan_lawnmower(plan, hf);
  ASSERT_EQ(lines.size(), 5u);
  for (std::size_t j = 0; j < lines.size(); ++j) {
    const double expect = j % 2 == 0 ? 0.0 : std::numbers::pi;
    for (const auto& p : lines[j].poses) EXPECT_NEAR(p.heading, expect, 1e-12);
    EXPECT_GE(lines[j].poses.size(), 2u);
  }

  plan.orientation = LineOrientation::NorthSouth;
  const auto ns = plan_lawnmower(plan, hf);
  ASSERT_EQ(ns.size(), 5u);
  EXPECT_NEAR(ns[0].poses[0].heading, std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(ns[1].poses[0].heading, 1.5 * std::numbers::pi, 1e-12);
}

TEST(Terrain, LawnmowerSpacingAndAltitude) {
  const Heightfield hf = generate_heightfield({-10, -10, 120, 120}, 0.5, SpectrumParams{}, 4);
  LawnmowerPlan plan;
  plan.region = {0, 0, 100, 60};
  plan.line_spacing = 30.0;
  plan.sensor_depth = 2.0;
  plan.speed = 1.5;
  plan.ping_rate = 3.0;
  for (const auto& line : plan_lawnmower(plan, hf)) {
    EXPECT_DOUBLE_EQ(line.ping_spacing(), 0.5);
    for (std::size_t k = 0; k < line.poses.size(); ++k) {
      const auto& p = line.poses[k];
      EXPECT_NEAR(p.altitude, p.position.z() - *sample_depth(hf, p.position.x(), p.position.y()), 1e-12);
      EXPECT_GT(p.altitude, 0.0);
      EXPECT_DOUBLE_EQ(p.position.z(), -2.0);
      if (k > 0) {
        EXPECT_NEAR((p.position - line.poses[k - 1].position).norm(), 0.5, 1e-6);
      }
    }
  }
}

TEST(Terrain, LawnmowerErrors) {
  const Heightfield hf = generate_heightfield({0, 0, 50, 50}, 0.5, flat(-10.0), 1);
  LawnmowerPlan plan;
  plan.region = {5, 5, 0.1, 20};
  EXPECT_THROW(plan_lawnmower(plan, hf), ParameterError);
  plan.region = {5, 5, 40, 40};
  plan.line_spacing = 0.0;
  EXPECT_THROW(plan_lawnmower(plan, hf), ParameterError);
  plan.line_spacing = 10.0;
  plan.sensor_depth = 11.0;
  EXPECT_THROW(plan_lawnmower(plan, hf), ParameterError);
  plan.sensor_depth = 1.0;
  plan.region = {5, 5, 80, 40};
  EXPECT_THROW(plan_lawnmower(plan, hf), ParameterError);
}

TEST(Terrain, ReversedLine) {
  const Heightfield hf = generate_heightfield({0, 0, 50, 50}, 0.5, flat(-10.0), 1);
  LawnmowerPlan plan;
  plan.region = {5, 5, 40, 0};
  const auto line = plan_lawnmower(plan, hf).at(0);
  const auto rev = reversed(line);
  ASSERT_EQ(rev.poses.size(), line.poses.size());
  EXPECT_TRUE(rev.poses.front().position.isApprox(line.poses.back().position));
  EXPECT_NEAR(rev.poses[0].heading, std::numbers::pi, 1e-12);
}

TEST(Raster, RoundTripFile) {
  GridSpec spec{10.0, -5.0, 0.25, 7, 3};
  Raster r(spec, 0.0);
  for (std::size_t row = 0; row < 3; ++row) {
    for (std::size_t col = 0; col < 7; ++col) r.at(col, row) = -0.5 * static_cast<double>(row * 7 + col);
  }
  r.at(2, 1) = kNoData;
  const auto path = temp_dir("raster") / "r.grid";
  write_raster(path, r, {{"quantity", "z"}});
  const Raster back = read_raster(path);
  EXPECT_TRUE(back.spec().same_geometry(spec));
  EXPECT_EQ(back.values(), r.values());
  const auto header = read_raster_header(path);
  EXPECT_EQ(header.at("byte_order"), "LE");
  EXPECT_EQ(header.at("dtype"), "f32");
  EXPECT_EQ(header.at("quantity"), "z");
  EXPECT_EQ(header.at("n_cols"), 7);
}

TEST(Raster, MalformedFilesRejected) {
  const auto dir = temp_dir("raster_bad");
  {
    std::ofstream(dir / "a.grid") << "not json\n";
  }
  EXPECT_THROW(read_raster(dir / "a.grid"), IoError);
  {
    std::ofstream(dir / "b.grid") << R"({"n_cols":4,"n_rows":4,"x0":0,"y0":0,"cell_size":1,"nodata":-9999,"byte_order":"LE","dtype":"f32"})"
                                  << "\n" << "abc";
  }
  EXPECT_THROW(read_raster(dir / "b.grid"), IoError);
  EXPECT_THROW(read_raster(dir / "missing.grid"), IoError);
}

TEST(Raster, LocateHalfOpen) {
  GridSpec s{0, 0, 1.0, 3, 2};
  EXPECT_EQ(s.locate(0.0, 0.0)->col, 0u);
  EXPECT_EQ(s.locate(1.0, 0.5)->col, 1u);
  EXPECT_EQ(s.locate(2.999, 1.999)->row, 1u);
  EXPECT_FALSE(s.locate(3.0, 0.5).has_value());
  EXPECT_FALSE(s.locate(-0.001, 0.5).has_value());
}
