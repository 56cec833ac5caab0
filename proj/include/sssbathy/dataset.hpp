#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sssbathy/arc.hpp"
#include "sssbathy/array2d.hpp"
#include "sssbathy/sonar_sim.hpp"
#include "sssbathy/terrain.hpp"

namespace sssbathy {

/// Georeferenced nadir soundings of one line: seabed points directly below the
/// sensor, z = sensor z - altimeter reading.
struct AltimeterTrack {
  int line_id = 0;
  std::vector<Vec3> points;
};

AltimeterTrack make_track(const SurveyLine& line, std::span<const double> altimeter);

struct DrapeResult {
  Array2D<double> gt;        ///< relative depth (sensor z - seabed z), 0 where not valid
  Array2D<BinStatus> mask;
};

/// Intersects every (ping, bin) arc with the heightfield. Uses the same
/// profile sampling as the simulator so the two masks agree bin for bin.
DrapeResult drape_ground_truth(const Heightfield& hf, std::span<const SonarPose> poses, const SonarParams& params,
                               Side side, const SimConfig& config = {});

/// Renders nadir soundings from `tracks` into the waterfall of the target
/// poses. A sounding lands on ping k when its along-track distance to the
/// ping is at most `slab_half_width` and it lies on the requested side
/// (or within the slab of the track itself). Value written: relative depth.
/// Zero means absent. Collisions keep the sounding nearest along-track.
/// With a heightfield, a sounding is kept only when it is the first seabed
/// return at its own range on the ping's across-track profile, so soundings
/// hidden behind nearer terrain do not land on a bin that shows another point.
Array2D<double> associate_sparse_depth(std::span<const AltimeterTrack> tracks, std::span<const SonarPose> poses,
                                       const SonarParams& params, Side side, double slab_half_width,
                                       const Heightfield* hf = nullptr, double profile_step = 0.05);

/// Half the mean distance between consecutive pings.
double half_ping_spacing(std::span<const SonarPose> poses);

struct WaterfallSet {
  WaterfallImage intensity;
  Array2D<double> sparse_depth;
  Array2D<double> gt_depth;
  Array2D<BinStatus> mask;

  int line_id() const { return intensity.line_id; }
  Side side() const { return intensity.side; }
  void validate() const;
};

/// Drapes ground truth, associates sparse depth and merges the masks.
WaterfallSet build_waterfall_set(const Heightfield& hf, const WaterfallImage& wf, std::span<const AltimeterTrack> tracks,
                                 const SimConfig& config = {}, double slab_half_width = 0.0);

struct WindowProvenance {
  int line_id = 0;
  Side side = Side::Starboard;
  std::size_t ping_offset = 0;
  bool flipped = false;

  /// Ping index of window row `row`.
  std::size_t ping(std::size_t row, std::size_t height) const {
    return ping_offset + (flipped ? height - 1 - row : row);
  }
};

struct WindowSample {
  Array2D<double> intensity;
  Array2D<double> sparse;
  Array2D<double> target;
  Array2D<std::uint8_t> mask;  ///< 1 on valid pixels
  WindowProvenance provenance;
  SonarParams params;          ///< column geometry after downsampling (n_bins = window width)

  std::size_t height() const { return intensity.rows(); }
  std::size_t width() const { return intensity.cols(); }
  std::size_t valid_count() const;
};

/// Column-downsampled waterfall: block mean of intensity, block median of
/// valid depths; a column block is valid when at least half its bins are.
struct DownsampledSet {
  int line_id = 0;
  Side side = Side::Starboard;
  SonarParams params;
  Array2D<double> intensity;
  Array2D<double> sparse;
  Array2D<double> target;
  Array2D<std::uint8_t> mask;
};

DownsampledSet downsample_columns(const WaterfallSet& ws, std::size_t width);

struct WindowConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  double overlap = 0.75;
  bool augment_flip = true;
  bool normalize = true;
};

/// Window stride in pings: max(1, round(height * (1 - overlap))).
std::size_t window_stride(std::size_t height, double overlap);

/// Windows in canonical order: by ping offset, unflipped before flipped.
std::vector<WindowSample> make_windows(const WaterfallSet& ws, const WindowConfig& config);
std::vector<WindowSample> make_windows(const DownsampledSet& ds, const WindowConfig& config);

/// Reverses the ping axis of every channel and toggles the provenance flag.
WindowSample flip_window(const WindowSample& w);

/// Affine map of the intensity channel to zero mean and unit deviation over
/// valid pixels. Windows without spread map to all zeros.
WindowSample normalize_intensity(const WindowSample& w);

// --- line splits -----------------------------------------------------------

struct LineSplit {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

/// Holds out validation lines from the East-West set and test lines from the
/// North-South set (orthogonal to each other), preferring interior lines.
/// Deterministic in `seed`.
LineSplit split_lines(std::span<const SurveyLine> lines, std::uint64_t seed, std::size_t n_val = 1,
                      std::size_t n_test = 1);

nlohmann::json split_to_json(const LineSplit& s);
LineSplit split_from_json(const nlohmann::json& j);

// --- dataset files -----------------------------------------------------------
//
// <dir>/<stem>.json holds waterfall metadata; <stem>.intensity.grid,
// <stem>.sparse.grid, <stem>.gt.grid and <stem>.mask.grid are rasters in the
// common grid format with one row per ping and one column per bin.

std::string waterfall_stem(int line_id, Side side);
void write_waterfall_set(const std::filesystem::path& dir, const WaterfallSet& ws);
WaterfallSet read_waterfall_set(const std::filesystem::path& dir, int line_id, Side side);

}  // namespace sssbathy
