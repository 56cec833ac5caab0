#pragma once

#include <cstddef>
#include <string_view>

#include <Eigen/Core>

namespace sssbathy {

using Vec3 = Eigen::Vector3d;

enum class Side { Port = 0, Starboard = 1 };

std::string_view to_string(Side side);
Side side_from_string(std::string_view s);

/// Sensor pose for one ping. World frame: x east, y north, z up, sea surface at z = 0.
/// Attitude is heading only (roll = pitch = 0).
struct SonarPose {
  Vec3 position = Vec3::Zero();
  double heading = 0.0;   ///< radians, counter-clockwise from +x, in [0, 2*pi)
  double altitude = 0.0;  ///< sensor height above the seabed at nadir, meters

  void validate() const;
};

struct SonarParams {
  double sound_speed = 1500.0;  ///< m/s
  double max_range = 50.0;      ///< m, slant range of the far edge of the last bin
  std::size_t n_bins = 512;     ///< per side
  double vertical_beamwidth = 50.0 * 3.14159265358979323846 / 180.0;
  double horizontal_beamwidth = 0.1 * 3.14159265358979323846 / 180.0;

  double bin_width() const { return max_range / static_cast<double>(n_bins); }
  void validate() const;
};

struct GeoSample {
  double slant_range = 0.0;
  double ground_range = 0.0;
  double grazing_angle = 0.0;
  Vec3 point = Vec3::Zero();
  Side side = Side::Starboard;
};

/// Wraps an angle into [0, 2*pi).
double wrap_heading(double radians);

/// Horizontal unit vector pointing out of the given side of the vehicle.
Vec3 side_direction(double heading, Side side);

/// Horizontal unit vector along the direction of travel.
Vec3 along_track_direction(double heading);

/// Straight-ray grazing angle asin((altitude - point_altitude) / slant_range).
/// Throws DomainError when the ratio leaves [-1, 1].
double grazing_angle(double altitude, double point_altitude, double slant_range);

/// Isovelocity slant range c * t / 2.
double slant_range(double sound_speed, double two_way_time);

/// sqrt(slant_range^2 - delta_z^2); DomainError when |delta_z| > slant_range.
double ground_range(double slant_range, double delta_z);

/// Slant range of the center of a bin: (bin + 0.5) * max_range / n_bins.
double bin_to_slant_range(std::size_t bin_index, const SonarParams& params);

/// Index of the bin whose slant-range interval contains `range`, or n_bins when out of range.
std::size_t slant_range_to_bin(double range, const SonarParams& params);

/// Places the seabed point seen at `range` on the given side with the given
/// depth below the sensor (relative_depth = sensor z - point z > 0).
GeoSample backproject_range(const SonarPose& pose, Side side, double range, double relative_depth);

/// backproject_range at the center of `bin_index`.
GeoSample backproject(const SonarPose& pose, const SonarParams& params, Side side, std::size_t bin_index,
                      double relative_depth);

}  // namespace sssbathy
