#include "sssbathy/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <spdlog/spdlog.h>

#include "sssbathy/error.hpp"
#include "sssbathy/rng.hpp"

namespace sssbathy {

namespace {

constexpr double kPi = std::numbers::pi;

GridSpec region_grid(const Region& region, double cell_size) {
  if (!(cell_size > 0.0)) throw ParameterError("cell_size must be > 0");
  if (!(region.width > 0.0 && region.height > 0.0)) throw ParameterError("region must have positive area");
  const auto cols = static_cast<std::size_t>(std::llround(region.width / cell_size));
  const auto rows = static_cast<std::size_t>(std::llround(region.height / cell_size));
  if (cols < 2 || rows < 2) throw ParameterError("region must span at least 2x2 cells");
  return GridSpec{region.x0, region.y0, cell_size, cols, rows};
}

struct Wave {
  double kx, ky, phase, amp;
};

}  // namespace

Heightfield generate_heightfield(const Region& region, double cell_size, const SpectrumParams& sp,
                                 std::uint64_t seed) {
  const GridSpec spec = region_grid(region, cell_size);
  if (sp.amplitude == 0.0 || sp.n_waves == 0) {
    if (sp.offset > 0.0 || sp.offset < -200.0) throw ParameterError("flat offset must be within [-200, 0]");
    return Heightfield(spec, sp.offset);
  }
  if (!(sp.band_low < sp.band_high) || sp.band_low < -200.0 || sp.band_high > 0.0) {
    throw ParameterError("depth band must satisfy -200 <= low < high <= 0");
  }
  if (!(sp.min_wavelength > 0.0 && sp.min_wavelength <= sp.max_wavelength)) {
    throw ParameterError("wavelength range is invalid");
  }

  Rng rng(derive_seed({seed, 0x7e44a1ULL}));
  std::vector<Wave> waves;
  waves.reserve(sp.n_waves);
  const double log_lo = std::log(sp.min_wavelength), log_hi = std::log(sp.max_wavelength);
  for (std::size_t i = 0; i < sp.n_waves; ++i) {
    const double wavelength = std::exp(rng.uniform(log_lo, log_hi));
    const double dir = rng.uniform(0.0, 2.0 * kPi);
    const double k = 2.0 * kPi / wavelength;
    const double amp = sp.amplitude * std::pow(wavelength / sp.max_wavelength, sp.exponent);
    waves.push_back({k * std::cos(dir), k * std::sin(dir), rng.uniform(0.0, 2.0 * kPi), amp});
  }

  Heightfield hf(spec, 0.0);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t r = 0; r < spec.n_rows; ++r) {
    const double y = spec.center_y(r);
    for (std::size_t c = 0; c < spec.n_cols; ++c) {
      const double x = spec.center_x(c);
      double v = 0.0;
      for (const auto& w : waves) v += w.amp * std::cos(w.kx * x + w.ky * y + w.phase);
      hf.at(c, r) = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double span = hi - lo;
  for (double& v : hf.values().data()) {
    v = span > 0.0 ? sp.band_low + (v - lo) / span * (sp.band_high - sp.band_low) : sp.band_low;
  }
  return hf;
}

double feature_elevation(const Feature& f, double x, double y) {
  const double dx = x - f.cx, dy = y - f.cy;
  const double d = std::hypot(dx, dy);
  if (d >= f.radius) return 0.0;
  const double taper = 0.5 * (1.0 + std::cos(kPi * d / f.radius));
  switch (f.kind) {
    case FeatureKind::Hill:
      return f.height * taper;
    case FeatureKind::Boulder: {
      const double t = d / f.radius;
      return f.height * std::sqrt(1.0 - t * t);
    }
    case FeatureKind::Ripple: {
      const double along = dx * std::cos(f.direction) + dy * std::sin(f.direction);
      return f.height * taper * 0.5 * (1.0 + std::cos(2.0 * kPi * along / f.wavelength));
    }
  }
  return 0.0;
}

Heightfield add_features(const Heightfield& hf, const std::vector<Feature>& features, std::uint64_t seed) {
  const auto& s = hf.spec();
  std::vector<Feature> fs = features;
  Rng rng(derive_seed({seed, 0xfea7ULL}));
  for (auto& f : fs) {
    if (!(f.radius > 0.0)) throw ParameterError("feature radius must be > 0");
    if (f.cx < s.x0 || f.cx > s.x0 + s.width() || f.cy < s.y0 || f.cy > s.y0 + s.height()) {
      throw ParameterError("feature center outside the grid");
    }
    if (f.kind == FeatureKind::Ripple) {
      if (!(f.wavelength > 0.0)) throw ParameterError("ripple wavelength must be > 0");
      // Phase jitter expressed as a sub-wavelength shift of the center.
      const double shift = rng.uniform(0.0, f.wavelength);
      f.cx += shift * std::cos(f.direction);
      f.cy += shift * std::sin(f.direction);
    }
  }

  Heightfield out = hf;
  std::size_t clipped = 0;
  for (std::size_t r = 0; r < s.n_rows; ++r) {
    for (std::size_t c = 0; c < s.n_cols; ++c) {
      if (out.is_nodata(out.at(c, r))) continue;
      double v = out.at(c, r);
      for (const auto& f : fs) v += feature_elevation(f, s.center_x(c), s.center_y(r));
      if (v > 0.0) {
        v = 0.0;
        ++clipped;
      }
      out.at(c, r) = v;
    }
  }
  if (clipped > 0) spdlog::warn("add_features: {} cells rose above the sea surface and were clipped to 0", clipped);
  return out;
}

std::optional<double> sample_depth(const Heightfield& hf, double x, double y) { return sample_bilinear(hf, x, y); }

std::vector<SurveyLine> plan_lawnmower(const LawnmowerPlan& plan, const Heightfield& hf) {
  if (!(plan.line_spacing > 0.0)) throw ParameterError("line_spacing must be > 0");
  if (!(plan.speed > 0.0 && plan.ping_rate > 0.0)) throw ParameterError("speed and ping_rate must be > 0");
  if (plan.sensor_depth < 0.0) throw ParameterError("sensor_depth must be >= 0");
  const bool ew = plan.orientation == LineOrientation::EastWest;
  const double along = ew ? plan.region.width : plan.region.height;
  const double across = ew ? plan.region.height : plan.region.width;
  const double spacing = plan.speed / plan.ping_rate;
  if (!(along >= spacing) || !(across >= 0.0)) throw ParameterError("region is smaller than one survey line");

  const auto n_lines = static_cast<std::size_t>(std::floor(across / plan.line_spacing + 1e-9)) + 1;
  const auto n_pings = static_cast<std::size_t>(std::floor(along / spacing + 1e-9)) + 1;
  const double z = -plan.sensor_depth;

  std::vector<SurveyLine> lines;
  lines.reserve(n_lines);
  for (std::size_t j = 0; j < n_lines; ++j) {
    SurveyLine line;
    line.line_id = plan.first_line_id + static_cast<int>(j);
    line.orientation = plan.orientation;
    line.ping_rate = plan.ping_rate;
    line.speed = plan.speed;
    const bool forward = j % 2 == 0;
    const double base_heading = ew ? 0.0 : kPi / 2.0;
    const double heading = wrap_heading(forward ? base_heading : base_heading + kPi);
    const double offset = static_cast<double>(j) * plan.line_spacing;
    line.poses.reserve(n_pings);
    for (std::size_t k = 0; k < n_pings; ++k) {
      const double s = forward ? static_cast<double>(k) * spacing : along - static_cast<double>(k) * spacing;
      const double x = ew ? plan.region.x0 + s : plan.region.x0 + offset;
      const double y = ew ? plan.region.y0 + offset : plan.region.y0 + s;
      const auto seabed = sample_depth(hf, x, y);
      if (!seabed) throw ParameterError("survey line leaves the heightfield interior");
      SonarPose pose;
      pose.position = Vec3(x, y, z);
      pose.heading = heading;
      pose.altitude = z - *seabed;
      if (!(pose.altitude > 0.0)) throw ParameterError("seabed reaches the sensor depth along a planned track");
      line.poses.push_back(pose);
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

SurveyLine reversed(const SurveyLine& line) {
  SurveyLine out = line;
  std::reverse(out.poses.begin(), out.poses.end());
  for (auto& p : out.poses) p.heading = wrap_heading(p.heading + kPi);
  return out;
}

}  // namespace sssbathy
