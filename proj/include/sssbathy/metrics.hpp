#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssbathy/dataset.hpp"
#include "sssbathy/fusion.hpp"
#include "sssbathy/nn/fcn.hpp"
#include "sssbathy/raster.hpp"

namespace sssbathy {

/// Truth heightfield at the centers of `spec` (bilinear; nodata outside).
/// Returns the heightfield unchanged when the geometries already agree.
Raster resample_truth(const Heightfield& truth, const GridSpec& spec);

struct GridComparison {
  double mae = 0.0;
  double max_error = 0.0;
  std::size_t n_cells = 0;    ///< cells valid in both
  double coverage = 0.0;      ///< n_cells / cells with valid truth

  nlohmann::json to_json() const;
};

/// Mean |depth - truth| over cells valid in both rasters. The truth is
/// resampled onto the grid when the geometries differ.
/// Throws DomainError when no cell overlaps.
GridComparison grid_mae(const Raster& depth, const Heightfield& truth);
GridComparison grid_mae(const BathyGrid& grid, const Heightfield& truth);

/// Per-cell |depth - truth|; nodata where either is missing.
Raster error_map(const Raster& depth, const Heightfield& truth);

struct CalibrationReport {
  double band_fraction = 0.0;  ///< fraction of pixels with |residual| <= var * ln 2
  double nll = 0.0;
  double mae = 0.0;
  std::size_t pixels = 0;

  nlohmann::json to_json() const;
};

/// Residual-level report; `residuals` and `variances` are paired.
CalibrationReport calibration_from_residuals(std::span<const double> residuals, std::span<const double> variances);

/// Report over the valid pixels of the windows (targets and masks from the windows).
CalibrationReport calibration_report(std::span<const nn::Prediction> predictions,
                                     std::span<const WindowSample> windows);

struct WeightingAblation {
  GridComparison weighted;
  GridComparison unweighted;
  /// Mean error of each method over the worst decile of cells, ranked by the
  /// larger of the two errors in each cell.
  double worst_decile_weighted = 0.0;
  double worst_decile_unweighted = 0.0;
  std::size_t worst_decile_cells = 0;

  // Zoom on the square region where the unweighted error sum is largest.
  GridSpec zoom_spec;
  Raster zoom_truth;
  Raster zoom_weighted;
  Raster zoom_unweighted;

  nlohmann::json to_json() const;
};

WeightingAblation fusion_weighting_ablation(std::span<const PointEstimate> points, const GridSpec& spec,
                                            const Heightfield& truth, std::size_t zoom_cells = 40);

/// Window of `r` starting at (col0, row0) with n x n cells (clipped to the raster).
Raster crop(const Raster& r, std::size_t col0, std::size_t row0, std::size_t n);

}  // namespace sssbathy
