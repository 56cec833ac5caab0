#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssbathy/dataset.hpp"
#include "sssbathy/nn/fcn.hpp"
#include "sssbathy/raster.hpp"

namespace sssbathy {

struct PointProvenance {
  int line_id = 0;
  Side side = Side::Starboard;
  std::size_t ping = 0;
  std::size_t bin = 0;

  auto operator<=>(const PointProvenance&) const = default;
};

struct PointEstimate {
  Vec3 point = Vec3::Zero();
  double confidence = 1.0;  ///< 1 / var, > 0
  PointProvenance provenance;

  double variance() const { return 1.0 / confidence; }
};

/// Poses of each survey line, keyed by line id.
using PoseTable = std::map<int, std::vector<SonarPose>>;

struct PointConversion {
  std::vector<PointEstimate> points;
  std::size_t dropped = 0;  ///< valid pixels whose mean depth is not placeable (mu <= 0, mu > slant range, var <= 0)
};

/// One point per valid pixel: the predicted relative depth is back-projected
/// from the pose of the pixel's ping at the center of its bin.
PointConversion predictions_to_points(std::span<const WindowSample> windows,
                                      std::span<const nn::Prediction> predictions, const PoseTable& poses);

struct OutlierFilter {
  enum class Kind { None, Percentile, Absolute };
  Kind kind = Kind::Percentile;
  double value = 5.0;  ///< percent of points for Percentile, variance threshold for Absolute

  static OutlierFilter none() { return {Kind::None, 0.0}; }
  static OutlierFilter percentile(double p) { return {Kind::Percentile, p}; }
  static OutlierFilter absolute(double v) { return {Kind::Absolute, v}; }

  nlohmann::json to_json() const;
  static OutlierFilter from_json(const nlohmann::json& j);
};

/// Percentile(p) drops the floor(n * p / 100) points with the largest
/// variance; Absolute(v) drops points with variance > v. Survivors keep their order.
std::vector<PointEstimate> filter_outliers(std::span<const PointEstimate> points, const OutlierFilter& filter);

struct BathyGrid {
  Raster depth;       ///< fused seabed z
  Raster confidence;  ///< mean confidence of the cell's points
  Raster count;       ///< number of points, 0 where empty

  const GridSpec& spec() const { return depth.spec(); }
};

struct FuseOptions {
  unsigned threads = 1;
};

/// Confidence-weighted mean depth per cell and mean confidence per cell.
/// Points are accumulated in a canonical order with compensated sums, so the
/// result does not depend on input order or thread count.
BathyGrid fuse(std::span<const PointEstimate> points, const GridSpec& spec, const FuseOptions& options = {});

/// Plain mean depth per cell. The confidence raster still holds the mean
/// point confidence.
BathyGrid fuse_unweighted(std::span<const PointEstimate> points, const GridSpec& spec,
                          const FuseOptions& options = {});

/// Grid covering `extent` at `cell_size`, anchored at its lower-left corner.
GridSpec grid_for(const GridSpec& extent, double cell_size);

/// Count-weighted block mean of the depth raster over factor x factor cells.
BathyGrid coarsen(const BathyGrid& grid, std::size_t factor);

// <prefix>.depth.grid, <prefix>.confidence.grid, <prefix>.count.grid
void write_bathy_grid(const std::filesystem::path& prefix, const BathyGrid& grid);
BathyGrid read_bathy_grid(const std::filesystem::path& prefix);

// Points file: <path> holds a JSON header line then per point
// x, y, z, confidence, line, side, ping, bin as f64 LE.
void write_points(const std::filesystem::path& path, std::span<const PointEstimate> points);
std::vector<PointEstimate> read_points(const std::filesystem::path& path);

}  // namespace sssbathy
