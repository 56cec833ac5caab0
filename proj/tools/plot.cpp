#include "sssbathy/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sssbathy/error.hpp"

namespace sssbathy {

PlotMode plot_mode_from_string(const std::string& s) {
  if (s == "gray") return PlotMode::Gray;
  if (s == "colormap") return PlotMode::Colormap;
  if (s == "error") return PlotMode::Error;
  throw ParameterError("unknown plot mode '" + s + "' (expected gray, colormap or error)");
}

std::string to_string(PlotMode mode) {
  switch (mode) {
    case PlotMode::Gray: return "gray";
    case PlotMode::Colormap: return "colormap";
    case PlotMode::Error: return "error";
  }
  return "gray";
}

Rgb rainbow(double t) {
  t = std::clamp(t, 0.0, 1.0);
  // Hue 240 deg (blue) down to 0 deg (red) at full saturation and value.
  const double h = (1.0 - t) * 4.0;
  const auto seg = std::min(3, static_cast<int>(std::floor(h)));
  const double f = h - seg;
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v)); };
  switch (seg) {
    case 0: return {255, q(f), 0};            // red -> yellow
    case 1: return {q(1.0 - f), 255, 0};      // yellow -> green
    case 2: return {0, 255, q(f)};            // green -> cyan
    default: return {0, q(1.0 - f), 255};     // cyan -> blue
  }
}

nlohmann::json PlotScaling::to_json() const {
  return {{"mode", to_string(mode)},
          {"min", min},
          {"max", max},
          {"valid_cells", valid_cells},
          {"width", width},
          {"height", height},
          {"orientation", "north-up"},
          {"nodata_value", mode == PlotMode::Gray ? nlohmann::json(0)
                                                  : nlohmann::json(std::vector<int>(kNoDataColor.begin(),
                                                                                    kNoDataColor.end()))}};
}

Image render_raster(const Raster& r, PlotMode mode, PlotScaling* scaling) {
  const GridSpec& s = r.spec();
  PlotScaling sc;
  sc.mode = mode;
  sc.width = s.n_cols;
  sc.height = s.n_rows;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : r.values().data()) {
    if (r.is_nodata(v)) continue;
    if (mode == PlotMode::Error) v = std::abs(v);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++sc.valid_cells;
  }
  if (sc.valid_cells == 0) throw DomainError("raster has no valid cell to plot");
  if (mode == PlotMode::Error) lo = 0.0;
  sc.min = lo;
  sc.max = hi;

  Image img;
  img.width = s.n_cols;
  img.height = s.n_rows;
  img.channels = mode == PlotMode::Gray ? 1 : 3;
  img.pixels.assign(img.width * img.height * img.channels, 0);
  const double span = hi - lo;
  for (std::size_t row = 0; row < s.n_rows; ++row) {
    const std::size_t out_row = s.n_rows - 1 - row;
    for (std::size_t col = 0; col < s.n_cols; ++col) {
      std::uint8_t* px = &img.pixels[(out_row * img.width + col) * img.channels];
      const double v = r.at(col, row);
      if (r.is_nodata(v)) {
        if (img.channels == 3) std::copy(kNoDataColor.begin(), kNoDataColor.end(), px);
        continue;
      }
      const double t = span > 0.0 ? ((mode == PlotMode::Error ? std::abs(v) : v) - lo) / span : 0.5;
      if (mode == PlotMode::Gray) {
        px[0] = static_cast<std::uint8_t>(std::lround(255.0 * t));
        if (span == 0.0) px[0] = 128;
      } else {
        const Rgb c = rainbow(t);
        std::copy(c.begin(), c.end(), px);
      }
    }
  }
  if (scaling) *scaling = sc;
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw ParameterError("image must have 1 or 3 channels");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if ((magic != "P5" && magic != "P6") || maxval != 255 || !is) throw IoError("unsupported image " + path.string());
  is.get();
  Image img;
  img.width = w;
  img.height = h;
  img.channels = magic == "P5" ? 1 : 3;
  img.pixels.resize(w * h * img.channels);
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!is) throw IoError("truncated image " + path.string());
  return img;
}

PlotScaling plot_raster(const Raster& r, const std::filesystem::path& out, PlotMode mode) {
  PlotScaling sc;
  const Image img = render_raster(r, mode, &sc);
  write_pnm(out, img);
  std::ofstream js(out.string() + ".json", std::ios::trunc);
  if (!js) throw IoError("cannot write " + out.string() + ".json");
  js << sc.to_json().dump(1) << '\n';
  return sc;
}

}  // namespace sssbathy
