#include "sssbathy/geom.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sssbathy/error.hpp"

namespace sssbathy {

std::string_view to_string(Side side) { return side == Side::Port ? "port" : "starboard"; }

Side side_from_string(std::string_view s) {
  if (s == "port") return Side::Port;
  if (s == "starboard") return Side::Starboard;
  throw ParameterError("unknown side '" + std::string(s) + "'");
}

void SonarPose::validate() const {
  if (!(altitude > 0.0)) throw ParameterError("pose altitude must be > 0");
  if (!(heading >= 0.0 && heading < 2.0 * std::numbers::pi)) throw ParameterError("heading must be in [0, 2pi)");
  if (position.z() > 0.0) throw ParameterError("sensor must be at or below the sea surface");
}

void SonarParams::validate() const {
  if (!(sound_speed > 0.0)) throw ParameterError("sound_speed must be > 0");
  if (!(max_range > 0.0)) throw ParameterError("max_range must be > 0");
  if (n_bins < 2) throw ParameterError("n_bins must be >= 2");
  if (!(horizontal_beamwidth > 0.0 && horizontal_beamwidth < vertical_beamwidth &&
        vertical_beamwidth < std::numbers::pi)) {
    throw ParameterError("beamwidths must satisfy 0 < horizontal < vertical < pi");
  }
}

double wrap_heading(double radians) {
  const double two_pi = 2.0 * std::numbers::pi;
  double h = std::fmod(radians, two_pi);
  if (h < 0.0) h += two_pi;
  if (h >= two_pi) h = 0.0;
  return h;
}

Vec3 side_direction(double heading, Side side) {
  const Vec3 starboard(std::sin(heading), -std::cos(heading), 0.0);
  return side == Side::Starboard ? starboard : Vec3(-starboard);
}

Vec3 along_track_direction(double heading) { return {std::cos(heading), std::sin(heading), 0.0}; }

double grazing_angle(double altitude, double point_altitude, double slant_range) {
  if (!(slant_range > 0.0)) throw DomainError("slant range must be > 0");
  const double ratio = (altitude - point_altitude) / slant_range;
  if (!(ratio >= -1.0 && ratio <= 1.0)) throw DomainError("vertical offset exceeds slant range");
  return std::asin(ratio);
}

double slant_range(double sound_speed, double two_way_time) {
  if (!(sound_speed > 0.0)) throw ParameterError("sound speed must be > 0");
  if (!(two_way_time >= 0.0)) throw ParameterError("two-way time must be >= 0");
  return sound_speed * two_way_time / 2.0;
}

double ground_range(double slant_range, double delta_z) {
  const double dz = std::abs(delta_z);
  if (!(slant_range >= dz)) throw DomainError("slant range shorter than vertical offset");
  return std::sqrt((slant_range - dz) * (slant_range + dz));
}

double bin_to_slant_range(std::size_t bin_index, const SonarParams& params) {
  if (bin_index >= params.n_bins) throw ParameterError("bin index out of range");
  return (static_cast<double>(bin_index) + 0.5) * params.max_range / static_cast<double>(params.n_bins);
}

std::size_t slant_range_to_bin(double range, const SonarParams& params) {
  if (!(range >= 0.0) || range >= params.max_range) return params.n_bins;
  const auto bin = static_cast<std::size_t>(std::floor(range / params.bin_width()));
  return std::min(bin, params.n_bins - 1);
}

GeoSample backproject_range(const SonarPose& pose, Side side, double range, double relative_depth) {
  if (!(relative_depth > 0.0)) throw ParameterError("relative depth must be > 0");
  GeoSample s;
  s.side = side;
  s.slant_range = range;
  s.ground_range = ground_range(range, relative_depth);
  s.grazing_angle = grazing_angle(relative_depth, 0.0, range);
  s.point = pose.position + s.ground_range * side_direction(pose.heading, side);
  s.point.z() = pose.position.z() - relative_depth;
  return s;
}

GeoSample backproject(const SonarPose& pose, const SonarParams& params, Side side, std::size_t bin_index,
                      double relative_depth) {
  return backproject_range(pose, side, bin_to_slant_range(bin_index, params), relative_depth);
}

}  // namespace sssbathy
