#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sssbathy/arc.hpp"
#include "sssbathy/array2d.hpp"
#include "sssbathy/geom.hpp"
#include "sssbathy/raster.hpp"
#include "sssbathy/rng.hpp"
#include "sssbathy/terrain.hpp"

namespace sssbathy {

struct SimConfig {
  double reflectivity = 0.9;
  double lambert_exponent = 2.0;  ///< intensity ~ cos(incidence)^exponent
  double speckle_sigma = 0.25;    ///< spread of the unit-mean speckle multiplier; 0 disables noise
  double profile_step = 0.05;     ///< across-track sampling step for the arc search, meters
  double altimeter_noise_std = 0.0;
  double altimeter_bias = 0.0;
  unsigned threads = 1;
};

/// Sidescan waterfall for one side of one line: rows are pings, columns are bins.
struct WaterfallImage {
  int line_id = 0;
  Side side = Side::Starboard;
  SonarParams params;
  std::vector<SonarPose> poses;
  Array2D<double> intensities;  ///< in [0, 1] for reflectivity <= 1
  Array2D<BinStatus> status;

  std::size_t n_pings() const { return intensities.rows(); }
  std::size_t n_bins() const { return intensities.cols(); }
  void validate() const;
};

struct PingReturn {
  std::vector<double> intensity;
  std::vector<BinStatus> status;
};

/// Noise-free part of the forward model: reflectivity * cos^n(incidence),
/// zero in the water column, in acoustic shadow, and on back-facing slopes.
PingReturn simulate_ping_clean(const Heightfield& hf, const SonarPose& pose, const SonarParams& params, Side side,
                               const SimConfig& config);

/// Forward model plus multiplicative speckle drawn from `noise_seed`.
PingReturn simulate_ping(const Heightfield& hf, const SonarPose& pose, const SonarParams& params, Side side,
                         std::uint64_t noise_seed, const SimConfig& config);

/// Unit-mean speckle multiplier built from a Rayleigh amplitude, standardized
/// and scaled by `sigma`, clamped at zero.
double speckle_multiplier(Rng& rng, double sigma);

/// Altimeter reading: sensor z minus seabed z at nadir, plus bias and Gaussian noise.
double altimeter(const Heightfield& hf, const SonarPose& pose, double noise_std = 0.0, double bias = 0.0,
                 std::uint64_t noise_seed = 0);

struct LineSimulation {
  WaterfallImage port;
  WaterfallImage starboard;
  std::vector<double> altimeter;  ///< one reading per ping

  const WaterfallImage& side(Side s) const { return s == Side::Port ? port : starboard; }
};

/// Every ping gets its own seed derived from (seed, line_id, side, ping), so
/// the multi-threaded result is bitwise equal to the serial one.
LineSimulation simulate_line(const Heightfield& hf, const SurveyLine& line, const SonarParams& params,
                             std::uint64_t seed, const SimConfig& config);

// Waterfall files: <stem>.json metadata, <stem>.f32 intensity payload and
// <stem>.status.u8 per-bin status payload.
void write_waterfall(const std::filesystem::path& stem, const WaterfallImage& wf);
WaterfallImage read_waterfall(const std::filesystem::path& stem);

nlohmann::json params_to_json(const SonarParams& p);
SonarParams params_from_json(const nlohmann::json& j);
nlohmann::json poses_to_json(const std::vector<SonarPose>& poses);
std::vector<SonarPose> poses_from_json(const nlohmann::json& j);

}  // namespace sssbathy
