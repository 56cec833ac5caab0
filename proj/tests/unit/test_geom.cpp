#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "sssbathy/error.hpp"
#include "sssbathy/geom.hpp"

using namespace sssbathy;

namespace {

SonarParams params(double max_range, std::size_t n_bins) {
  SonarParams p;
  p.max_range = max_range;
  p.n_bins = n_bins;
  return p;
}

SonarPose pose_at(double x, double y, double z, double heading, double altitude) {
  SonarPose p;
  p.position = Vec3(x, y, z);
  p.heading = heading;
  p.altitude = altitude;
  return p;
}

}  // namespace

TEST(Geom, GrazingAngle) {
  EXPECT_NEAR(grazing_angle(10, 0, 20), 0.5235988, 1e-7);
  EXPECT_DOUBLE_EQ(grazing_angle(10, 0, 10), std::numbers::pi / 2);
  EXPECT_THROW(grazing_angle(10, 0, 5), DomainError);
}

TEST(Geom, SlantRange) {
  EXPECT_DOUBLE_EQ(slant_range(1500, 0.02), 15.0);
  EXPECT_DOUBLE_EQ(slant_range(1480, 0.05), 37.0);
  EXPECT_DOUBLE_EQ(slant_range(1500, 0.0), 0.0);
  EXPECT_THROW(slant_range(0.0, 0.1), ParameterError);
  EXPECT_THROW(slant_range(-1500.0, 0.1), ParameterError);
}

TEST(Geom, GroundRange) {
  EXPECT_NEAR(ground_range(20, 10), 17.3205081, 1e-7);
  EXPECT_DOUBLE_EQ(ground_range(10, 10), 0.0);
  EXPECT_THROW(ground_range(5, 10), DomainError);
}

TEST(Geom, BinToSlantRange) {
  const auto p = params(50, 100);
  EXPECT_DOUBLE_EQ(bin_to_slant_range(0, p), 0.25);
  EXPECT_DOUBLE_EQ(bin_to_slant_range(99, p), 49.75);
  EXPECT_THROW(bin_to_slant_range(100, p), ParameterError);
}

TEST(Geom, SlantRangeToBinInvertsBinCenters) {
  const auto p = params(50, 512);
  for (std::size_t b = 0; b < p.n_bins; ++b) EXPECT_EQ(slant_range_to_bin(bin_to_slant_range(b, p), p), b);
  EXPECT_EQ(slant_range_to_bin(50.0, p), p.n_bins);
  EXPECT_EQ(slant_range_to_bin(-1.0, p), p.n_bins);
}

TEST(Geom, BackprojectHeadingZero) {
  const auto pose = pose_at(100, 200, 0, 0.0, 10.0);
  const GeoSample g = backproject_range(pose, Side::Starboard, 20.0, 10.0);
  EXPECT_NEAR(g.point.x(), 100.0, 1e-12);
  EXPECT_NEAR(g.point.y(), 200.0 - 17.3205081, 1e-7);
  EXPECT_NEAR(g.point.z(), -10.0, 1e-12);
  EXPECT_NEAR(g.ground_range, std::sqrt(300.0), 1e-12);
  EXPECT_NEAR(g.grazing_angle, std::numbers::pi / 6, 1e-12);

  const GeoSample port = backproject_range(pose, Side::Port, 20.0, 10.0);
  EXPECT_NEAR(port.point.y(), 200.0 + 17.3205081, 1e-7);
}

TEST(Geom, BackprojectRotatedHeading) {
  const auto pose = pose_at(100, 200, 0, std::numbers::pi / 4, 10.0);
  const GeoSample g = backproject_range(pose, Side::Starboard, 20.0, 10.0);
  EXPECT_NEAR(g.point.x(), 100.0 + 12.2474, 1e-4);
  EXPECT_NEAR(g.point.y(), 200.0 - 12.2474, 1e-4);
  EXPECT_NEAR(g.point.z(), -10.0, 1e-12);
}

TEST(Geom, BackprojectNadir) {
  const auto pose = pose_at(3, 4, -1, 1.0, 10.0);
  const GeoSample g = backproject_range(pose, Side::Port, 10.0, 10.0);
  EXPECT_DOUBLE_EQ(g.ground_range, 0.0);
  EXPECT_NEAR(g.point.x(), 3.0, 1e-12);
  EXPECT_NEAR(g.point.y(), 4.0, 1e-12);
  EXPECT_NEAR(g.point.z(), -11.0, 1e-12);
}

TEST(Geom, BackprojectViaBin) {
  const auto p = params(50, 100);
  const auto pose = pose_at(0, 0, 0, 0.0, 5.0);
  // Bin 39 has its center at 19.75 m.
  const GeoSample g = backproject(pose, p, Side::Starboard, 39, 5.0);
  EXPECT_DOUBLE_EQ(g.slant_range, 19.75);
  EXPECT_THROW(backproject(pose, p, Side::Starboard, 39, 0.0), ParameterError);
  EXPECT_THROW(backproject(pose, p, Side::Starboard, 39, -1.0), ParameterError);
  EXPECT_THROW(backproject(pose, p, Side::Starboard, 5, 5.0), DomainError);
}

TEST(Geom, RoundTripAndConsistency) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto p = params(60, 512);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto pose = pose_at(u(rng) * 400 - 200, u(rng) * 400 - 200, -u(rng) * 5, u(rng) * 2 * std::numbers::pi,
                              5 + u(rng) * 20);
    const std::size_t bin = 1 + static_cast<std::size_t>(u(rng) * 510);
    const double r = bin_to_slant_range(bin, p);
    const double dz = r * (0.05 + 0.9 * u(rng));
    const Side side = u(rng) < 0.5 ? Side::Port : Side::Starboard;
    const GeoSample g = backproject(pose, p, side, bin, dz);
    const double back = (pose.position - g.point).norm();
    EXPECT_NEAR(back, r, 1e-9 * r);
    EXPECT_GE(g.slant_range, g.ground_range);
    const double dzp = pose.position.z() - g.point.z();
    EXPECT_NEAR(g.slant_range * g.slant_range, g.ground_range * g.ground_range + dzp * dzp,
                1e-9 * g.slant_range * g.slant_range);
    EXPECT_NEAR(g.grazing_angle, std::atan(dz / g.ground_range), 1e-12);
  }
}

TEST(Geom, BackprojectEquivariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double heading = u(rng) * 2 * std::numbers::pi;
    const auto base = pose_at(0, 0, -1, heading, 12);
    const double r = 15 + 20 * u(rng), dz = 10 * u(rng) + 1;
    const GeoSample g0 = backproject_range(base, Side::Starboard, r, dz);

    const double tx = 50 * u(rng), ty = -30 * u(rng);
    const GeoSample gt = backproject_range(pose_at(tx, ty, -1, heading, 12), Side::Starboard, r, dz);
    EXPECT_NEAR(gt.point.x(), g0.point.x() + tx, 1e-9);
    EXPECT_NEAR(gt.point.y(), g0.point.y() + ty, 1e-9);

    const double rot = u(rng) * 2 * std::numbers::pi;
    const GeoSample gr =
        backproject_range(pose_at(0, 0, -1, wrap_heading(heading + rot), 12), Side::Starboard, r, dz);
    const double c = std::cos(rot), s = std::sin(rot);
    EXPECT_NEAR(gr.point.x(), c * g0.point.x() - s * g0.point.y(), 1e-9);
    EXPECT_NEAR(gr.point.y(), s * g0.point.x() + c * g0.point.y(), 1e-9);
    EXPECT_NEAR(gr.point.z(), g0.point.z(), 1e-12);
  }
}

TEST(Geom, SideDirections) {
  const Vec3 s = side_direction(0.0, Side::Starboard);
  EXPECT_NEAR(s.x(), 0.0, 1e-15);
  EXPECT_NEAR(s.y(), -1.0, 1e-15);
  EXPECT_TRUE(side_direction(1.3, Side::Port).isApprox(-side_direction(1.3, Side::Starboard)));
  EXPECT_NEAR(side_direction(0.7, Side::Port).dot(along_track_direction(0.7)), 0.0, 1e-15);
  EXPECT_EQ(side_from_string(to_string(Side::Port)), Side::Port);
  EXPECT_THROW(side_from_string("aft"), ParameterError);
}

TEST(Geom, WrapHeading) {
  EXPECT_DOUBLE_EQ(wrap_heading(0.0), 0.0);
  EXPECT_NEAR(wrap_heading(-std::numbers::pi / 2), 1.5 * std::numbers::pi, 1e-15);
  EXPECT_LT(wrap_heading(2 * std::numbers::pi), 2 * std::numbers::pi);
}

TEST(Geom, ParamValidation) {
  SonarParams p;
  EXPECT_NO_THROW(p.validate());
  p.n_bins = 1;
  EXPECT_THROW(p.validate(), ParameterError);
  p = SonarParams{};
  p.sound_speed = 0;
  EXPECT_THROW(p.validate(), ParameterError);
  p = SonarParams{};
  p.horizontal_beamwidth = p.vertical_beamwidth;
  EXPECT_THROW(p.validate(), ParameterError);

  SonarPose pose = pose_at(0, 0, 0, 0, 10);
  EXPECT_NO_THROW(pose.validate());
  pose.altitude = 0;
  EXPECT_THROW(pose.validate(), ParameterError);
  pose = pose_at(0, 0, 1, 0, 10);
  EXPECT_THROW(pose.validate(), ParameterError);
}
