#include "sssbathy/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sssbathy/error.hpp"

namespace sssbathy {

Raster resample_truth(const Heightfield& truth, const GridSpec& spec) {
  if (truth.spec().same_geometry(spec)) return truth;
  Raster out(spec, kNoData);
  for (std::size_t row = 0; row < spec.n_rows; ++row) {
    for (std::size_t col = 0; col < spec.n_cols; ++col) {
      if (const auto z = sample_bilinear(truth, spec.center_x(col), spec.center_y(row))) out.at(col, row) = *z;
    }
  }
  return out;
}

nlohmann::json GridComparison::to_json() const {
  return {{"mae", mae}, {"max_error", max_error}, {"n_cells", n_cells}, {"coverage", coverage}};
}

GridComparison grid_mae(const Raster& depth, const Heightfield& truth) {
  const Raster t = resample_truth(truth, depth.spec());
  GridComparison c;
  double sum = 0.0;
  std::size_t truth_cells = 0;
  const GridSpec& s = depth.spec();
  for (std::size_t row = 0; row < s.n_rows; ++row) {
    for (std::size_t col = 0; col < s.n_cols; ++col) {
      if (!t.valid(col, row)) continue;
      ++truth_cells;
      if (!depth.valid(col, row)) continue;
      const double e = std::abs(depth.at(col, row) - t.at(col, row));
      sum += e;
      c.max_error = std::max(c.max_error, e);
      ++c.n_cells;
    }
  }
  if (c.n_cells == 0) throw DomainError("grid and truth have no overlapping valid cells");
  c.mae = sum / static_cast<double>(c.n_cells);
  c.coverage = static_cast<double>(c.n_cells) / static_cast<double>(truth_cells);
  return c;
}

GridComparison grid_mae(const BathyGrid& grid, const Heightfield& truth) { return grid_mae(grid.depth, truth); }

Raster error_map(const Raster& depth, const Heightfield& truth) {
  const Raster t = resample_truth(truth, depth.spec());
  const GridSpec& s = depth.spec();
  Raster out(s, kNoData);
  for (std::size_t row = 0; row < s.n_rows; ++row) {
    for (std::size_t col = 0; col < s.n_cols; ++col) {
      if (t.valid(col, row) && depth.valid(col, row)) out.at(col, row) = std::abs(depth.at(col, row) - t.at(col, row));
    }
  }
  return out;
}

nlohmann::json CalibrationReport::to_json() const {
  return {{"band_fraction", band_fraction}, {"nll", nll}, {"mae", mae}, {"pixels", pixels}};
}

CalibrationReport calibration_from_residuals(std::span<const double> residuals, std::span<const double> variances) {
  if (residuals.size() != variances.size()) throw ParameterError("residuals and variances differ in length");
  if (residuals.empty()) throw EmptyMaskError();
  CalibrationReport c;
  std::size_t inside = 0;
  double nll = 0.0, mae = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const double r = std::abs(residuals[i]);
    const double v = variances[i];
    if (!(v > 0.0)) throw ParameterError("variance must be > 0");
    if (r <= v * std::numbers::ln2) ++inside;
    nll += r / v + std::log(v);
    mae += r;
  }
  c.pixels = residuals.size();
  const double n = static_cast<double>(c.pixels);
  c.band_fraction = static_cast<double>(inside) / n;
  c.nll = nll / n;
  c.mae = mae / n;
  return c;
}

CalibrationReport calibration_report(std::span<const nn::Prediction> predictions,
                                     std::span<const WindowSample> windows) {
  if (predictions.size() != windows.size()) throw ParameterError("windows and predictions differ in count");
  std::vector<double> res, var;
  for (std::size_t n = 0; n < windows.size(); ++n) {
    const auto& w = windows[n];
    for (std::size_t i = 0; i < w.mask.size(); ++i) {
      if (!w.mask.data()[i]) continue;
      res.push_back(w.target.data()[i] - predictions[n].mu.data()[i]);
      var.push_back(predictions[n].var.data()[i]);
    }
  }
  return calibration_from_residuals(res, var);
}

nlohmann::json WeightingAblation::to_json() const {
  return {{"weighted", weighted.to_json()},
          {"unweighted", unweighted.to_json()},
          {"worst_decile_weighted", worst_decile_weighted},
          {"worst_decile_unweighted", worst_decile_unweighted},
          {"worst_decile_cells", worst_decile_cells},
          {"zoom", {{"x0", zoom_spec.x0}, {"y0", zoom_spec.y0}, {"cell_size", zoom_spec.cell_size},
                    {"n_cols", zoom_spec.n_cols}, {"n_rows", zoom_spec.n_rows}}}};
}

Raster crop(const Raster& r, std::size_t col0, std::size_t row0, std::size_t n) {
  const GridSpec& s = r.spec();
  if (col0 >= s.n_cols || row0 >= s.n_rows) throw ParameterError("crop origin outside the raster");
  GridSpec c = s;
  c.x0 = s.x0 + static_cast<double>(col0) * s.cell_size;
  c.y0 = s.y0 + static_cast<double>(row0) * s.cell_size;
  c.n_cols = std::min(n, s.n_cols - col0);
  c.n_rows = std::min(n, s.n_rows - row0);
  Raster out(c, r.nodata(), r.nodata());
  for (std::size_t row = 0; row < c.n_rows; ++row) {
    for (std::size_t col = 0; col < c.n_cols; ++col) out.at(col, row) = r.at(col0 + col, row0 + row);
  }
  return out;
}

WeightingAblation fusion_weighting_ablation(std::span<const PointEstimate> points, const GridSpec& spec,
                                            const Heightfield& truth, std::size_t zoom_cells) {
  const BathyGrid w = fuse(points, spec);
  const BathyGrid u = fuse_unweighted(points, spec);
  WeightingAblation a;
  a.weighted = grid_mae(w, truth);
  a.unweighted = grid_mae(u, truth);

  const Raster ew = error_map(w.depth, truth);
  const Raster eu = error_map(u.depth, truth);
  struct CellErr {
    double key, w, u;
    std::size_t idx;
  };
  std::vector<CellErr> cells;
  for (std::size_t row = 0; row < spec.n_rows; ++row) {
    for (std::size_t col = 0; col < spec.n_cols; ++col) {
      if (!ew.valid(col, row) || !eu.valid(col, row)) continue;
      const double e1 = ew.at(col, row), e2 = eu.at(col, row);
      cells.push_back({std::max(e1, e2), e1, e2, row * spec.n_cols + col});
    }
  }
  std::sort(cells.begin(), cells.end(), [](const CellErr& x, const CellErr& y) {
    return x.key != y.key ? x.key > y.key : x.idx < y.idx;
  });
  a.worst_decile_cells = std::max<std::size_t>(1, cells.size() / 10);
  double sw = 0.0, su = 0.0;
  for (std::size_t i = 0; i < a.worst_decile_cells && i < cells.size(); ++i) {
    sw += cells[i].w;
    su += cells[i].u;
  }
  a.worst_decile_weighted = sw / static_cast<double>(a.worst_decile_cells);
  a.worst_decile_unweighted = su / static_cast<double>(a.worst_decile_cells);

  // Summed-area table of the unweighted error picks the zoom window.
  const std::size_t n = std::min({zoom_cells, spec.n_cols, spec.n_rows});
  std::vector<double> sat((spec.n_rows + 1) * (spec.n_cols + 1), 0.0);
  auto S = [&](std::size_t r, std::size_t c) -> double& { return sat[r * (spec.n_cols + 1) + c]; };
  for (std::size_t row = 0; row < spec.n_rows; ++row) {
    for (std::size_t col = 0; col < spec.n_cols; ++col) {
      const double e = eu.valid(col, row) ? eu.at(col, row) : 0.0;
      S(row + 1, col + 1) = e + S(row, col + 1) + S(row + 1, col) - S(row, col);
    }
  }
  double best = -1.0;
  std::size_t bc = 0, br = 0;
  for (std::size_t row = 0; row + n <= spec.n_rows; ++row) {
    for (std::size_t col = 0; col + n <= spec.n_cols; ++col) {
      const double s = S(row + n, col + n) - S(row, col + n) - S(row + n, col) + S(row, col);
      if (s > best) {
        best = s;
        bc = col;
        br = row;
      }
    }
  }
  a.zoom_truth = crop(resample_truth(truth, spec), bc, br, n);
  a.zoom_weighted = crop(w.depth, bc, br, n);
  a.zoom_unweighted = crop(u.depth, bc, br, n);
  a.zoom_spec = a.zoom_weighted.spec();
  return a;
}

}  // namespace sssbathy
