#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssbathy/raster.hpp"

namespace sssbathy {

enum class PlotMode { Gray, Colormap, Error };

PlotMode plot_mode_from_string(const std::string& s);
std::string to_string(PlotMode mode);

using Rgb = std::array<std::uint8_t, 3>;

/// Color given to nodata cells in the color modes. The rainbow never reaches
/// black, so the value is unambiguous there. Gray images have no spare level:
/// nodata is written as 0.
inline constexpr Rgb kNoDataColor{0, 0, 0};

/// Rainbow from blue (t = 0) through cyan, green and yellow to red (t = 1).
Rgb rainbow(double t);

struct PlotScaling {
  PlotMode mode = PlotMode::Gray;
  double min = 0.0;  ///< value drawn as 0 / blue
  double max = 0.0;  ///< value drawn as 255 / red
  std::size_t valid_cells = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  nlohmann::json to_json() const;
};

/// 8-bit image, rows top (north) to bottom; 1 channel for gray, 3 otherwise.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t col, std::size_t row, std::size_t ch = 0) const {
    return pixels[(row * width + col) * channels + ch];
  }
};

/// Gray: min -> 0, max -> 255 over valid cells (a constant raster renders
/// as 128). Colormap: rainbow between min and max. Error: rainbow between 0
/// and the largest absolute value. Throws DomainError when no cell is valid.
Image render_raster(const Raster& r, PlotMode mode, PlotScaling* scaling = nullptr);

/// Binary PGM (P5) or PPM (P6) depending on the channel count.
void write_pnm(const std::filesystem::path& path, const Image& image);
Image read_pnm(const std::filesystem::path& path);

/// Renders `r`, writes the image to `out` and the scaling to `out` + ".json".
PlotScaling plot_raster(const Raster& r, const std::filesystem::path& out, PlotMode mode);

}  // namespace sssbathy
