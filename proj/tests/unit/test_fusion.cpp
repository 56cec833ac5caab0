#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "sssbathy/dataset.hpp"
#include "sssbathy/error.hpp"
#include "sssbathy/fusion.hpp"

using namespace sssbathy;

namespace {

GridSpec unit_grid(std::size_t n = 4) { return GridSpec{0.0, 0.0, 1.0, n, n}; }

PointEstimate pt(double x, double y, double z, double c, std::size_t ping = 0) {
  PointEstimate p;
  p.point = Vec3(x, y, z);
  p.confidence = c;
  p.provenance.ping = ping;
  return p;
}

std::vector<PointEstimate> random_points(std::size_t n, std::uint64_t seed, double extent = 8.0) {
  Rng rng(seed);
  std::vector<PointEstimate> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = pt(rng.uniform(0.0, extent), rng.uniform(0.0, extent), rng.uniform(-20.0, -5.0),
                std::exp(rng.uniform(-4.0, 4.0)), i);
    p.provenance.line_id = static_cast<int>(i % 3);
    p.provenance.bin = i % 17;
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST(Fuse, TwoPointCell) {
  const std::vector<PointEstimate> pts{pt(0.5, 0.5, -10.0, 1.0, 0), pt(0.6, 0.4, -12.0, 3.0, 1)};
  const auto g = fuse(pts, unit_grid());
  EXPECT_DOUBLE_EQ(g.depth.at(0, 0), -11.5);
  EXPECT_DOUBLE_EQ(g.confidence.at(0, 0), 2.0);
  EXPECT_EQ(g.count.at(0, 0), 2.0);
  EXPECT_FALSE(g.depth.valid(1, 0));
  EXPECT_FALSE(g.confidence.valid(1, 0));
  EXPECT_EQ(g.count.at(1, 0), 0.0);

  const auto u = fuse_unweighted(pts, unit_grid());
  EXPECT_DOUBLE_EQ(u.depth.at(0, 0), -11.0);
  EXPECT_DOUBLE_EQ(u.confidence.at(0, 0), 2.0);
}

TEST(Fuse, SinglePoint) {
  const std::vector<PointEstimate> pts{pt(2.2, 3.7, -8.25, 0.7)};
  const auto g = fuse(pts, unit_grid());
  EXPECT_EQ(g.depth.at(2, 3), -8.25);
  EXPECT_EQ(g.confidence.at(2, 3), 0.7);
  EXPECT_EQ(g.count.count_valid(), 16u);
  EXPECT_EQ(g.depth.count_valid(), 1u);
}

TEST(Fuse, EmptyInputGivesNoData) {
  const auto g = fuse({}, unit_grid());
  EXPECT_EQ(g.depth.count_valid(), 0u);
  EXPECT_EQ(g.confidence.count_valid(), 0u);
  EXPECT_EQ(g.count.at(3, 3), 0.0);
}

TEST(Fuse, PointsOutsideGridIgnored) {
  const std::vector<PointEstimate> pts{pt(-0.5, 0.5, -1.0, 1.0), pt(4.0, 0.5, -1.0, 1.0), pt(3.99, 3.99, -2.0, 1.0)};
  const auto g = fuse(pts, unit_grid());
  EXPECT_EQ(g.depth.count_valid(), 1u);
  EXPECT_EQ(g.depth.at(3, 3), -2.0);
}

TEST(Fuse, RejectsNonPositiveConfidence) {
  const std::vector<PointEstimate> pts{pt(0.5, 0.5, -1.0, 0.0)};
  EXPECT_THROW(fuse(pts, unit_grid()), ParameterError);
}

TEST(Fuse, EqualConfidencesMatchUnweighted) {
  auto pts = random_points(500, 3);
  for (auto& p : pts) p.confidence = 2.5;
  const auto a = fuse(pts, unit_grid(8));
  const auto b = fuse_unweighted(pts, unit_grid(8));
  for (std::size_t i = 0; i < a.depth.values().size(); ++i) {
    EXPECT_NEAR(a.depth.values().data()[i], b.depth.values().data()[i], 1e-12);
  }
}

TEST(Fuse, HomogeneityPowerOfTwoIsBitwise) {
  const auto pts = random_points(2000, 5);
  const auto base = fuse(pts, unit_grid(8));
  for (double k : {2.0, 0.25, 1024.0, std::ldexp(1.0, -30)}) {
    auto scaled = pts;
    for (auto& p : scaled) p.confidence *= k;
    const auto g = fuse(scaled, unit_grid(8));
    EXPECT_EQ(g.depth.values(), base.depth.values()) << "k = " << k;
    for (std::size_t i = 0; i < g.confidence.values().size(); ++i) {
      if (!base.confidence.is_nodata(base.confidence.values().data()[i])) {
        EXPECT_EQ(g.confidence.values().data()[i], base.confidence.values().data()[i] * k);
      }
    }
  }
}

TEST(Fuse, HomogeneityGeneralScale) {
  const auto pts = random_points(2000, 6);
  const auto base = fuse(pts, unit_grid(8));
  for (double k : {3.0, 0.1, 7.77e5}) {
    auto scaled = pts;
    for (auto& p : scaled) p.confidence *= k;
    const auto g = fuse(scaled, unit_grid(8));
    for (std::size_t i = 0; i < g.depth.values().size(); ++i) {
      const double a = g.depth.values().data()[i], b = base.depth.values().data()[i];
      if (base.depth.is_nodata(b)) {
        EXPECT_TRUE(g.depth.is_nodata(a));
        continue;
      }
      EXPECT_LE(std::abs(a - b), 1e-12 * std::abs(b));
      const double ca = g.confidence.values().data()[i], cb = base.confidence.values().data()[i];
      EXPECT_LE(std::abs(ca - cb * k), 1e-12 * cb * k);
    }
  }
}

TEST(Fuse, OrderAndThreadIndependent) {
  auto pts = random_points(5000, 7, 16.0);
  const auto serial = fuse(pts, unit_grid(16));
  Rng rng(1);
  for (std::size_t i = pts.size(); i > 1; --i) std::swap(pts[i - 1], pts[rng.below(i)]);
  for (unsigned t : {1u, 2u, 3u, 8u}) {
    const auto g = fuse(pts, unit_grid(16), {t});
    EXPECT_EQ(g.depth.values(), serial.depth.values());
    EXPECT_EQ(g.confidence.values(), serial.confidence.values());
    EXPECT_EQ(g.count.values(), serial.count.values());
    const auto u = fuse_unweighted(pts, unit_grid(16), {t});
    EXPECT_EQ(u.depth.values(), fuse_unweighted(random_points(5000, 7, 16.0), unit_grid(16)).depth.values());
  }
}

TEST(Outliers, PercentileDropsLargestVariances) {
  std::vector<PointEstimate> pts;
  for (std::size_t i = 0; i < 100; ++i) pts.push_back(pt(0.5, 0.5, -1.0, 1.0 / static_cast<double>(i + 1), i));
  std::swap(pts[3], pts[97]);
  const auto kept = filter_outliers(pts, OutlierFilter::percentile(5.0));
  ASSERT_EQ(kept.size(), 95u);
  for (const auto& p : kept) EXPECT_LE(p.variance(), 95.0 + 1e-9);
  EXPECT_EQ(kept[0].provenance.ping, 0u);
  EXPECT_EQ(kept[3].provenance.ping, 4u);

  EXPECT_EQ(filter_outliers(pts, OutlierFilter::percentile(0.0)).size(), 100u);
  EXPECT_EQ(filter_outliers(pts, OutlierFilter::percentile(100.0)).size(), 0u);
  EXPECT_THROW(filter_outliers(pts, OutlierFilter::percentile(101.0)), ParameterError);
}

TEST(Outliers, NoneAndAbsolute) {
  const auto pts = random_points(50, 2);
  const auto none = filter_outliers(pts, OutlierFilter::none());
  ASSERT_EQ(none.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(none[i].point, pts[i].point);
  EXPECT_EQ(filter_outliers(pts, OutlierFilter::absolute(1e6)).size(), pts.size());

  const std::vector<PointEstimate> two{pt(0, 0, 0, 0.5), pt(0, 0, 0, 4.0)};
  const auto kept = filter_outliers(two, OutlierFilter::absolute(1.0));
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].confidence, 4.0);
}

TEST(Outliers, JsonRoundTrip) {
  for (const auto& f : {OutlierFilter::none(), OutlierFilter::percentile(7.5), OutlierFilter::absolute(2.0)}) {
    const auto back = OutlierFilter::from_json(f.to_json());
    EXPECT_EQ(back.kind, f.kind);
    if (f.kind != OutlierFilter::Kind::None) {
      EXPECT_EQ(back.value, f.value);
    }
  }
  EXPECT_THROW(OutlierFilter::from_json({{"kind", "median"}}), ParameterError);
}

namespace {

struct FlatCase {
  Heightfield hf;
  std::vector<SonarPose> poses;
  SonarParams params;
  WindowSample window;
};

FlatCase flat_case() {
  FlatCase fc;
  fc.hf = Heightfield(GridSpec{0.0, 0.0, 0.5, 200, 200}, -15.0);
  fc.params.n_bins = 64;
  fc.params.max_range = 40.0;
  for (std::size_t k = 0; k < 8; ++k) {
    SonarPose p;
    p.position = Vec3(30.0 + 0.5 * static_cast<double>(k), 50.0, -1.0);
    p.heading = 0.0;
    p.altitude = 14.0;
    fc.poses.push_back(p);
  }
  const auto d = drape_ground_truth(fc.hf, fc.poses, fc.params, Side::Port);
  WindowSample& w = fc.window;
  w.params = fc.params;
  w.intensity = Array2D<double>(8, 64, 0.0);
  w.sparse = Array2D<double>(8, 64, 0.0);
  w.target = d.gt;
  w.mask = Array2D<std::uint8_t>(8, 64, 0);
  for (std::size_t i = 0; i < d.mask.size(); ++i) w.mask.data()[i] = d.mask.data()[i] == BinStatus::Valid;
  w.provenance = {4, Side::Port, 0, false};
  return fc;
}

}  // namespace

TEST(Points, FlatSeabedRoundTrip) {
  const auto fc = flat_case();
  nn::Prediction pred{fc.window.target, Array2D<double>(8, 64, 0.25)};
  const std::vector<WindowSample> ws{fc.window};
  const std::vector<nn::Prediction> ps{pred};
  const auto conv = predictions_to_points(ws, ps, PoseTable{{4, fc.poses}});
  EXPECT_EQ(conv.dropped, 0u);
  ASSERT_EQ(conv.points.size(), fc.window.valid_count());
  ASSERT_GT(conv.points.size(), 100u);
  for (const auto& p : conv.points) {
    EXPECT_NEAR(p.point.z(), -15.0, 1e-6);
    EXPECT_DOUBLE_EQ(p.confidence, 4.0);
    EXPECT_GT(p.point.y(), 50.0);  // port of an eastbound line is north
    EXPECT_EQ(p.provenance.line_id, 4);
  }
}

TEST(Points, FlippedWindowUsesOriginalPing) {
  const auto fc = flat_case();
  const auto flipped = flip_window(fc.window);
  nn::Prediction pred{flipped.target, Array2D<double>(8, 64, 1.0)};
  const std::vector<WindowSample> ws{flipped};
  const std::vector<nn::Prediction> ps{pred};
  const auto conv = predictions_to_points(ws, ps, PoseTable{{4, fc.poses}});
  for (const auto& p : conv.points) {
    EXPECT_NEAR(p.point.x(), fc.poses[p.provenance.ping].position.x(), 1e-9);
  }
}

TEST(Points, GeometryViolationsDropped) {
  const auto fc = flat_case();
  nn::Prediction pred{fc.window.target, Array2D<double>(8, 64, 1.0)};
  std::size_t row = 2, col = 0;
  while (!fc.window.mask(row, col)) ++col;
  pred.mu(row, col) = bin_to_slant_range(col, fc.params) + 0.1;
  pred.mu(row, col + 1) = -1.0;
  pred.var(row, col + 2) = 0.0;
  const std::vector<WindowSample> ws{fc.window};
  const std::vector<nn::Prediction> ps{pred};
  const auto conv = predictions_to_points(ws, ps, PoseTable{{4, fc.poses}});
  EXPECT_EQ(conv.dropped, 3u);
  EXPECT_EQ(conv.points.size() + 3, fc.window.valid_count());
  EXPECT_THROW(predictions_to_points(ws, ps, PoseTable{{5, fc.poses}}), ParameterError);
}

TEST(Grid, GridForCoversExtent) {
  const GridSpec extent{10.0, 20.0, 0.5, 400, 300};
  const auto g = grid_for(extent, 0.25);
  EXPECT_EQ(g.n_cols, 800u);
  EXPECT_EQ(g.n_rows, 600u);
  EXPECT_EQ(g.x0, 10.0);
  const auto c = grid_for(extent, 0.3);
  EXPECT_GE(c.width(), extent.width());
  EXPECT_THROW(grid_for(extent, 0.0), ParameterError);
}

TEST(Grid, CoarsenIsCountWeighted) {
  const std::vector<PointEstimate> pts{pt(0.5, 0.5, -10.0, 1.0, 0), pt(0.5, 0.5, -10.0, 1.0, 1),
                                       pt(1.5, 0.5, -13.0, 4.0, 2)};
  const auto g = fuse(pts, unit_grid());
  const auto c = coarsen(g, 2);
  EXPECT_EQ(c.spec().n_cols, 2u);
  EXPECT_EQ(c.spec().cell_size, 2.0);
  EXPECT_DOUBLE_EQ(c.depth.at(0, 0), -11.0);
  EXPECT_DOUBLE_EQ(c.confidence.at(0, 0), 2.0);
  EXPECT_EQ(c.count.at(0, 0), 3.0);
  EXPECT_FALSE(c.depth.valid(1, 1));
}

TEST(Files, PointsAndGridRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "sssbathy_fusion_files";
  std::filesystem::create_directories(dir);
  auto pts = random_points(40, 9);
  pts[3].provenance.side = Side::Port;
  write_points(dir / "p.pts", pts);
  const auto back = read_points(dir / "p.pts");
  ASSERT_EQ(back.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(back[i].point, pts[i].point);
    EXPECT_EQ(back[i].confidence, pts[i].confidence);
    EXPECT_EQ(back[i].provenance, pts[i].provenance);
  }

  const auto g = fuse(pts, unit_grid(8));
  write_bathy_grid(dir / "g", g);
  const auto gb = read_bathy_grid(dir / "g");
  EXPECT_EQ(gb.count.values(), g.count.values());
  EXPECT_EQ(gb.depth.count_valid(), g.depth.count_valid());

  std::ofstream(dir / "bad.pts") << "not json\n";
  EXPECT_THROW(read_points(dir / "bad.pts"), IoError);
  EXPECT_THROW(read_points(dir / "missing.pts"), IoError);
  std::filesystem::remove_all(dir);
}
