#include "sssbathy/raster.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace sssbathy {

namespace {

template <typename U>
U to_le(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) out = (out << 8) | ((v >> (8 * i)) & 0xff);
    return out;
  }
}

}  // namespace

std::optional<GridSpec::Cell> GridSpec::locate(double x, double y) const {
  const double fc = std::floor((x - x0) / cell_size);
  const double fr = std::floor((y - y0) / cell_size);
  if (!(fc >= 0.0 && fr >= 0.0)) return std::nullopt;
  if (fc >= static_cast<double>(n_cols) || fr >= static_cast<double>(n_rows)) return std::nullopt;
  return Cell{static_cast<std::size_t>(fc), static_cast<std::size_t>(fr)};
}

bool GridSpec::same_geometry(const GridSpec& o, double tol) const {
  return n_cols == o.n_cols && n_rows == o.n_rows && std::abs(x0 - o.x0) <= tol &&
         std::abs(y0 - o.y0) <= tol && std::abs(cell_size - o.cell_size) <= tol;
}

void GridSpec::validate() const {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw ParameterError("cell_size must be > 0");
  if (n_cols == 0 || n_rows == 0) throw ParameterError("grid must have at least one cell");
  if (!std::isfinite(x0) || !std::isfinite(y0)) throw ParameterError("grid origin must be finite");
}

Raster::Raster(GridSpec spec, double fill, double nodata)
    : spec_(spec), nodata_(nodata), values_(spec.n_rows, spec.n_cols, fill) {
  spec_.validate();
}

std::size_t Raster::count_valid() const {
  std::size_t n = 0;
  for (double v : values_.data()) n += is_nodata(v) ? 0 : 1;
  return n;
}

std::optional<double> sample_bilinear(const Raster& r, double x, double y) {
  const auto& s = r.spec();
  const double fx = (x - s.x0) / s.cell_size - 0.5;
  const double fy = (y - s.y0) / s.cell_size - 0.5;
  const double max_c = static_cast<double>(s.n_cols - 1);
  const double max_r = static_cast<double>(s.n_rows - 1);
  if (!(fx >= 0.0 && fy >= 0.0 && fx <= max_c && fy <= max_r)) return std::nullopt;
  auto c0 = static_cast<std::size_t>(fx);
  auto r0 = static_cast<std::size_t>(fy);
  if (c0 + 1 >= s.n_cols) c0 = s.n_cols >= 2 ? s.n_cols - 2 : 0;
  if (r0 + 1 >= s.n_rows) r0 = s.n_rows >= 2 ? s.n_rows - 2 : 0;
  const std::size_t c1 = std::min(c0 + 1, s.n_cols - 1);
  const std::size_t r1 = std::min(r0 + 1, s.n_rows - 1);
  const double tx = fx - static_cast<double>(c0);
  const double ty = fy - static_cast<double>(r0);
  const double v00 = r.at(c0, r0), v10 = r.at(c1, r0), v01 = r.at(c0, r1), v11 = r.at(c1, r1);
  if (r.is_nodata(v00) || r.is_nodata(v10) || r.is_nodata(v01) || r.is_nodata(v11)) return std::nullopt;
  // Exact at nodes: tx/ty of zero collapse each lerp to its left operand.
  const double bottom = tx == 0.0 ? v00 : v00 + tx * (v10 - v00);
  const double top = tx == 0.0 ? v01 : v01 + tx * (v11 - v01);
  return ty == 0.0 ? bottom : bottom + ty * (top - bottom);
}

nlohmann::json raster_header(const Raster& r) {
  const auto& s = r.spec();
  return {{"n_cols", s.n_cols}, {"n_rows", s.n_rows}, {"x0", s.x0},       {"y0", s.y0},
          {"cell_size", s.cell_size}, {"nodata", r.nodata()}, {"byte_order", "LE"}, {"dtype", "f32"}};
}

void write_f32_le(std::ostream& os, std::span<const double> values) {
  std::vector<std::uint32_t> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    buf[i] = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
}

void write_f64_le(std::ostream& os, std::span<const double> values) {
  std::vector<std::uint64_t> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) buf[i] = to_le(std::bit_cast<std::uint64_t>(values[i]));
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
}

std::vector<double> read_f32_le(std::istream& is, std::size_t count) {
  std::vector<std::uint32_t> buf(count);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<std::size_t>(is.gcount()) != count * 4) throw IoError("truncated f32 payload");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(to_le(buf[i]));
  return out;
}

std::vector<double> read_f64_le(std::istream& is, std::size_t count) {
  std::vector<std::uint64_t> buf(count);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * 8));
  if (static_cast<std::size_t>(is.gcount()) != count * 8) throw IoError("truncated f64 payload");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<double>(to_le(buf[i]));
  return out;
}

void write_raster(const std::filesystem::path& path, const Raster& r, const nlohmann::json& extra) {
  auto header = raster_header(r);
  for (const auto& [k, v] : extra.items()) {
    if (!header.contains(k)) header[k] = v;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << header.dump() << '\n';
  write_f32_le(os, r.values().data());
  if (!os) throw IoError("write failed: " + path.string());
}

namespace {

nlohmann::json parse_header_line(std::istream& is, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty raster file: " + path.string());
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("malformed raster header in " + path.string() + ": " + e.what());
  }
  for (const char* key : {"n_cols", "n_rows", "x0", "y0", "cell_size", "nodata", "byte_order", "dtype"}) {
    if (!h.contains(key)) throw IoError(std::string("raster header missing '") + key + "'");
  }
  if (h["byte_order"] != "LE" || h["dtype"] != "f32") throw IoError("unsupported raster encoding");
  return h;
}

}  // namespace

nlohmann::json read_raster_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return parse_header_line(is, path);
}

Raster read_raster(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const auto h = parse_header_line(is, path);
  GridSpec spec{h["x0"].get<double>(), h["y0"].get<double>(), h["cell_size"].get<double>(),
                h["n_cols"].get<std::size_t>(), h["n_rows"].get<std::size_t>()};
  const double nodata = static_cast<float>(h["nodata"].get<double>());
  Raster r(spec, 0.0, nodata);
  r.values().data() = read_f32_le(is, spec.n_cells());
  return r;
}

}  // namespace sssbathy
