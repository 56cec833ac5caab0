#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssbathy/array2d.hpp"

namespace sssbathy {

/// Regular grid geometry. (x0, y0) is the lower-left corner of cell (0, 0);
/// row index grows with y (north), column index with x (east).
struct GridSpec {
  double x0 = 0.0;
  double y0 = 0.0;
  double cell_size = 1.0;
  std::size_t n_cols = 0;
  std::size_t n_rows = 0;

  double center_x(std::size_t col) const { return x0 + (static_cast<double>(col) + 0.5) * cell_size; }
  double center_y(std::size_t row) const { return y0 + (static_cast<double>(row) + 0.5) * cell_size; }
  double width() const { return static_cast<double>(n_cols) * cell_size; }
  double height() const { return static_cast<double>(n_rows) * cell_size; }
  std::size_t n_cells() const { return n_cols * n_rows; }

  struct Cell {
    std::size_t col;
    std::size_t row;
  };
  /// Cell containing (x, y); cells are half-open [left, right) x [bottom, top).
  std::optional<Cell> locate(double x, double y) const;

  bool same_geometry(const GridSpec& other, double tol = 1e-9) const;
  void validate() const;
};

inline constexpr double kNoData = -9999.0;

/// Raster of doubles with a nodata sentinel. All grids in the project use this type.
class Raster {
 public:
  Raster() = default;
  Raster(GridSpec spec, double fill, double nodata = kNoData);

  const GridSpec& spec() const { return spec_; }
  double nodata() const { return nodata_; }
  bool is_nodata(double v) const { return v == nodata_ || !std::isfinite(v); }
  bool valid(std::size_t col, std::size_t row) const { return !is_nodata(values_(row, col)); }

  double& at(std::size_t col, std::size_t row) { return values_(row, col); }
  double at(std::size_t col, std::size_t row) const { return values_(row, col); }

  Array2D<double>& values() { return values_; }
  const Array2D<double>& values() const { return values_; }

  std::size_t count_valid() const;

 private:
  GridSpec spec_{};
  double nodata_ = kNoData;
  Array2D<double> values_;
};

/// Seabed ground-truth surface: z (m, negative below the sea surface) at cell centers.
using Heightfield = Raster;

/// Bilinear interpolation between cell centers. nullopt outside the interior
/// (the hull of the cell centers) or when a neighbor carries nodata.
std::optional<double> sample_bilinear(const Raster& r, double x, double y);

// --- file format ---------------------------------------------------------
//
// One-line JSON header terminated by '\n', then n_rows * n_cols little-endian
// float32 values, row-major, row 0 first.

nlohmann::json raster_header(const Raster& r);
void write_raster(const std::filesystem::path& path, const Raster& r,
                  const nlohmann::json& extra = nlohmann::json::object());
Raster read_raster(const std::filesystem::path& path);
/// Header only; leaves the payload unread.
nlohmann::json read_raster_header(const std::filesystem::path& path);

// Raw little-endian payload helpers shared by the other file formats.
void write_f32_le(std::ostream& os, std::span<const double> values);
void write_f64_le(std::ostream& os, std::span<const double> values);
std::vector<double> read_f32_le(std::istream& is, std::size_t count);
std::vector<double> read_f64_le(std::istream& is, std::size_t count);

}  // namespace sssbathy
