#pragma once

#include <cstdint>
#include <vector>

#include "sssbathy/geom.hpp"
#include "sssbathy/raster.hpp"

namespace sssbathy {

/// Axis-aligned rectangle in world coordinates (meters).
struct Region {
  double x0 = 0.0;
  double y0 = 0.0;
  double width = 0.0;
  double height = 0.0;
};

/// Random smooth field: a sum of cosine waves with power-law amplitude decay,
/// rescaled into [band_low, band_high]. amplitude == 0 (or n_waves == 0)
/// yields a flat seabed at `offset`.
struct SpectrumParams {
  std::size_t n_waves = 30;
  double amplitude = 1.0;
  double min_wavelength = 15.0;
  double max_wavelength = 250.0;
  double exponent = 1.0;  ///< amplitude ~ (wavelength / max_wavelength)^exponent
  double band_low = -21.0;
  double band_high = -9.0;
  double offset = -12.0;
};

Heightfield generate_heightfield(const Region& region, double cell_size, const SpectrumParams& spectrum,
                                 std::uint64_t seed);

enum class FeatureKind { Hill, Boulder, Ripple };

struct Feature {
  FeatureKind kind = FeatureKind::Hill;
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
  double height = 1.0;
  double wavelength = 2.0;  ///< ripple crest spacing
  double direction = 0.0;   ///< ripple crest normal, radians from +x
};

/// Elevation added by one feature at (x, y). Hill: raised-cosine bump;
/// boulder: hemispherical cap; ripple: cosine crests under a raised-cosine taper.
double feature_elevation(const Feature& f, double x, double y);

/// Adds features cell by cell. Cells pushed above the sea surface are clipped
/// to 0 and reported with a warning. `seed` jitters ripple phase.
Heightfield add_features(const Heightfield& hf, const std::vector<Feature>& features, std::uint64_t seed);

/// Seabed z at (x, y) by bilinear interpolation; nullopt outside the interior.
std::optional<double> sample_depth(const Heightfield& hf, double x, double y);

enum class LineOrientation { EastWest, NorthSouth };

struct SurveyLine {
  int line_id = 0;
  LineOrientation orientation = LineOrientation::EastWest;
  std::vector<SonarPose> poses;
  double ping_rate = 2.0;  ///< Hz
  double speed = 1.0;      ///< m/s

  double ping_spacing() const { return speed / ping_rate; }
};

struct LawnmowerPlan {
  Region region;
  double line_spacing = 25.0;
  double sensor_depth = 1.0;  ///< meters below the surface, >= 0
  double speed = 1.0;
  double ping_rate = 2.0;
  LineOrientation orientation = LineOrientation::EastWest;
  int first_line_id = 0;
};

/// Parallel lines across `region`, alternating direction. EastWest lines run
/// along x at y = y0 + j * spacing for j = 0..floor(height / spacing).
/// Throws ParameterError if any ping has no seabed below it or a
/// non-positive altitude.
std::vector<SurveyLine> plan_lawnmower(const LawnmowerPlan& plan, const Heightfield& hf);

/// Same track traversed in the opposite direction (poses reversed, heading + pi).
SurveyLine reversed(const SurveyLine& line);

}  // namespace sssbathy
