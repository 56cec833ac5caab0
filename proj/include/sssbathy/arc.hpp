#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sssbathy/geom.hpp"
#include "sssbathy/terrain.hpp"

namespace sssbathy {

/// Per-bin status shared by waterfall and dataset grids.
enum class BinStatus : std::uint8_t { Valid = 0, Nadir = 1, Missing = 2 };

/// Intersection of an iso-range arc with the seabed in the across-track plane.
struct ArcHit {
  double ground_range = 0.0;
  double z = 0.0;             ///< seabed z at the hit
  bool visible = true;        ///< false when terrain nearer to the sensor occludes the hit
  double cos_incidence = 0.0; ///< cosine between the ray back to the sensor and the profile normal (may be < 0)
};

/// Seabed elevation profile sampled outward from nadir along one side of a ping.
///
/// Every ping and bin uses the same convention: the reported intersection is
/// the smallest ground range g at which the seabed lies at slant distance r
/// from the sensor, i.e. the first point where the arc, swept from straight
/// down toward the horizontal, leaves the seabed.
class AcrossTrackProfile {
 public:
  AcrossTrackProfile(const Heightfield& hf, const SonarPose& pose, Side side, double max_ground_range,
                     double step);

  std::size_t n_samples() const { return z_.size(); }
  double step() const { return step_; }
  /// Exact seabed z at ground range g (bilinear on the heightfield).
  std::optional<double> z_at(double g) const;
  double sensor_z() const { return sensor_z_; }

  /// nullopt for nadir ranges (r < altitude) or when the arc misses the sampled seabed.
  std::optional<ArcHit> intersect(double slant_range) const;

  /// Intersects a non-decreasing sequence of ranges in one outward sweep.
  /// Returns one status per range; hits are written where status is Valid.
  std::vector<BinStatus> intersect_sorted(std::span<const double> ranges, std::vector<ArcHit>& hits) const;

 private:
  double distance(std::size_t j) const;
  ArcHit refine(std::size_t j, double r) const;

  const Heightfield* hf_;
  Vec3 origin_;
  Vec3 dir_;
  double sensor_z_;
  double altitude_;
  double step_;
  std::vector<double> z_;           // z_[j] at g = j * step
  std::vector<double> prefix_min_;  // min over 1..j of (sensor_z - z_i) / g_i
};

}  // namespace sssbathy
