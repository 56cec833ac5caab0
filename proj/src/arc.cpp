#include "sssbathy/arc.hpp"

#include <cmath>
#include <limits>

#include "sssbathy/error.hpp"

namespace sssbathy {

AcrossTrackProfile::AcrossTrackProfile(const Heightfield& hf, const SonarPose& pose, Side side,
                                       double max_ground_range, double step)
    : hf_(&hf),
      origin_(pose.position),
      dir_(side_direction(pose.heading, side)),
      sensor_z_(pose.position.z()),
      altitude_(pose.altitude),
      step_(step) {
  if (!(step > 0.0)) throw ParameterError("profile step must be > 0");
  const auto n = static_cast<std::size_t>(std::ceil(max_ground_range / step)) + 1;
  z_.reserve(n);
  prefix_min_.reserve(n);
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const auto z = z_at(static_cast<double>(j) * step);
    if (!z) break;
    z_.push_back(*z);
    if (j > 0) running = std::min(running, (sensor_z_ - *z) / (static_cast<double>(j) * step));
    prefix_min_.push_back(running);
  }
}

std::optional<double> AcrossTrackProfile::z_at(double g) const {
  const Vec3 p = origin_ + g * dir_;
  return sample_depth(*hf_, p.x(), p.y());
}

double AcrossTrackProfile::distance(std::size_t j) const {
  const double g = static_cast<double>(j) * step_;
  return std::hypot(g, sensor_z_ - z_[j]);
}

ArcHit AcrossTrackProfile::refine(std::size_t j, double r) const {
  // Root of d(g) = r lies in (g_{j-1}, g_j]; bisect on the exact surface.
  double lo = static_cast<double>(j - 1) * step_;
  double hi = static_cast<double>(j) * step_;
  double z_hi = z_[j];
  for (int it = 0; it < 48 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto zm = z_at(mid);
    const double zmid = zm ? *zm : z_hi;
    if (std::hypot(mid, sensor_z_ - zmid) >= r) {
      hi = mid;
      z_hi = zmid;
    } else {
      lo = mid;
    }
  }
  ArcHit hit;
  hit.ground_range = hi;
  hit.z = z_hi;

  const double dz = sensor_z_ - hit.z;
  const double slope = dz / hit.ground_range;
  hit.visible = slope <= prefix_min_[j - 1] * (1.0 + 1e-9) + 1e-12;

  const double h = 0.25 * step_;
  const auto z_plus = z_at(hit.ground_range + h);
  const auto z_minus = z_at(std::max(0.0, hit.ground_range - h));
  double dzdg = 0.0;
  if (z_plus && z_minus) {
    dzdg = (*z_plus - *z_minus) / (hit.ground_range + h - std::max(0.0, hit.ground_range - h));
  } else if (z_minus) {
    dzdg = (hit.z - *z_minus) / (hit.ground_range - std::max(0.0, hit.ground_range - h));
  }
  // Normal (-dz/dg, 1); ray back to the sensor (-g, dz) / r.
  const double norm = std::sqrt(1.0 + dzdg * dzdg);
  const double range = std::hypot(hit.ground_range, dz);
  hit.cos_incidence = (dzdg * hit.ground_range + dz) / (norm * range);
  return hit;
}

std::optional<ArcHit> AcrossTrackProfile::intersect(double r) const {
  std::vector<ArcHit> hits;
  const double ranges[1] = {r};
  const auto status = intersect_sorted(ranges, hits);
  if (status[0] != BinStatus::Valid) return std::nullopt;
  return hits[0];
}

std::vector<BinStatus> AcrossTrackProfile::intersect_sorted(std::span<const double> ranges,
                                                            std::vector<ArcHit>& hits) const {
  std::vector<BinStatus> status(ranges.size(), BinStatus::Missing);
  hits.assign(ranges.size(), ArcHit{});
  std::size_t j = 1;
  for (std::size_t b = 0; b < ranges.size(); ++b) {
    const double r = ranges[b];
    if (r < altitude_) {
      status[b] = BinStatus::Nadir;
      continue;
    }
    if (z_.empty()) continue;
    if (r == altitude_) {
      ArcHit hit;
      hit.z = z_[0];
      hit.cos_incidence = 1.0;
      hits[b] = hit;
      status[b] = BinStatus::Valid;
      continue;
    }
    while (j < z_.size() && distance(j) < r) ++j;
    if (j >= z_.size()) continue;
    hits[b] = refine(j, r);
    status[b] = BinStatus::Valid;
  }
  return status;
}

}  // namespace sssbathy
