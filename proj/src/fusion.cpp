#include "sssbathy/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "sssbathy/error.hpp"

namespace sssbathy {

PointConversion predictions_to_points(std::span<const WindowSample> windows,
                                      std::span<const nn::Prediction> predictions, const PoseTable& poses) {
  if (windows.size() != predictions.size()) throw ParameterError("windows and predictions differ in count");
  PointConversion out;
  for (std::size_t n = 0; n < windows.size(); ++n) {
    const auto& w = windows[n];
    const auto& p = predictions[n];
    if (p.mu.rows() != w.height() || p.mu.cols() != w.width()) throw ParameterError("prediction shape mismatch");
    const auto it = poses.find(w.provenance.line_id);
    if (it == poses.end()) throw ParameterError("no poses for line " + std::to_string(w.provenance.line_id));
    const auto& line_poses = it->second;
    for (std::size_t row = 0; row < w.height(); ++row) {
      const std::size_t ping = w.provenance.ping(row, w.height());
      if (ping >= line_poses.size()) throw ParameterError("window ping outside the line's poses");
      const SonarPose& pose = line_poses[ping];
      for (std::size_t col = 0; col < w.width(); ++col) {
        if (!w.mask(row, col)) continue;
        const double mu = p.mu(row, col);
        const double var = p.var(row, col);
        const double r = bin_to_slant_range(col, w.params);
        if (!(mu > 0.0) || mu > r || !(var > 0.0) || !std::isfinite(var)) {
          ++out.dropped;
          continue;
        }
        const GeoSample g = backproject_range(pose, w.provenance.side, r, mu);
        out.points.push_back({g.point, 1.0 / var, {w.provenance.line_id, w.provenance.side, ping, col}});
      }
    }
  }
  return out;
}

nlohmann::json OutlierFilter::to_json() const {
  const char* k = kind == Kind::None ? "none" : kind == Kind::Percentile ? "percentile" : "absolute";
  return {{"kind", k}, {"value", value}};
}

OutlierFilter OutlierFilter::from_json(const nlohmann::json& j) {
  const std::string k = j.value("kind", std::string("percentile"));
  OutlierFilter f;
  f.value = j.value("value", 5.0);
  if (k == "none") {
    f.kind = Kind::None;
  } else if (k == "percentile") {
    f.kind = Kind::Percentile;
    if (!(f.value >= 0.0 && f.value <= 100.0)) throw ParameterError("percentile must be in [0, 100]");
  } else if (k == "absolute") {
    f.kind = Kind::Absolute;
  } else {
    throw ParameterError("unknown outlier filter '" + k + "'");
  }
  return f;
}

namespace {

bool canonical_less(const PointEstimate& a, const PointEstimate& b) {
  if (a.provenance != b.provenance) return a.provenance < b.provenance;
  for (int i = 0; i < 3; ++i) {
    if (a.point[i] != b.point[i]) return a.point[i] < b.point[i];
  }
  return a.confidence < b.confidence;
}

struct Neumaier {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

BathyGrid accumulate(std::span<const PointEstimate> points, const GridSpec& spec, bool weighted,
                     const FuseOptions& options) {
  spec.validate();
  BathyGrid g{Raster(spec, kNoData), Raster(spec, kNoData), Raster(spec, 0.0)};

  struct Entry {
    std::size_t cell;
    std::size_t index;
  };
  std::vector<Entry> entries;
  entries.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.confidence > 0.0)) throw ParameterError("point confidence must be > 0");
    const auto cell = spec.locate(p.point.x(), p.point.y());
    if (!cell) continue;
    entries.push_back({cell->row * spec.n_cols + cell->col, i});
  }
  std::sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
    if (a.cell != b.cell) return a.cell < b.cell;
    return canonical_less(points[a.index], points[b.index]);
  });

  // Cell runs are independent; threads take disjoint ranges of them.
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i == 0 || entries[i].cell != entries[i - 1].cell) starts.push_back(i);
  }
  starts.push_back(entries.size());
  const std::size_t n_runs = starts.size() - 1;

  auto work = [&](std::size_t run_begin, std::size_t run_end) {
    for (std::size_t r = run_begin; r < run_end; ++r) {
      Neumaier zw, w, c;
      for (std::size_t i = starts[r]; i < starts[r + 1]; ++i) {
        const auto& p = points[entries[i].index];
        const double weight = weighted ? p.confidence : 1.0;
        zw.add(p.point.z() * weight);
        w.add(weight);
        c.add(p.confidence);
      }
      const std::size_t cell = entries[starts[r]].cell;
      const std::size_t col = cell % spec.n_cols, row = cell / spec.n_cols;
      const double n = static_cast<double>(starts[r + 1] - starts[r]);
      g.depth.at(col, row) = zw.value() / w.value();
      g.confidence.at(col, row) = c.value() / n;
      g.count.at(col, row) = n;
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n_runs)));
  if (threads <= 1) {
    work(0, n_runs);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n_runs + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(n_runs, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  return g;
}

}  // namespace

std::vector<PointEstimate> filter_outliers(std::span<const PointEstimate> points, const OutlierFilter& filter) {
  std::vector<PointEstimate> out;
  switch (filter.kind) {
    case OutlierFilter::Kind::None:
      return {points.begin(), points.end()};
    case OutlierFilter::Kind::Absolute:
      for (const auto& p : points) {
        if (!(p.variance() > filter.value)) out.push_back(p);
      }
      return out;
    case OutlierFilter::Kind::Percentile: {
      if (!(filter.value >= 0.0 && filter.value <= 100.0)) throw ParameterError("percentile must be in [0, 100]");
      const auto n_drop =
          static_cast<std::size_t>(std::floor(static_cast<double>(points.size()) * filter.value / 100.0));
      std::vector<std::size_t> idx(points.size());
      std::iota(idx.begin(), idx.end(), 0);
      // Lowest confidence = largest variance first; ties broken canonically.
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (points[a].confidence != points[b].confidence) return points[a].confidence < points[b].confidence;
        return canonical_less(points[a], points[b]);
      });
      std::vector<char> keep(points.size(), 1);
      for (std::size_t i = 0; i < n_drop; ++i) keep[idx[i]] = 0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (keep[i]) out.push_back(points[i]);
      }
      return out;
    }
  }
  return out;
}

BathyGrid fuse(std::span<const PointEstimate> points, const GridSpec& spec, const FuseOptions& options) {
  return accumulate(points, spec, true, options);
}

BathyGrid fuse_unweighted(std::span<const PointEstimate> points, const GridSpec& spec, const FuseOptions& options) {
  return accumulate(points, spec, false, options);
}

GridSpec grid_for(const GridSpec& extent, double cell_size) {
  if (!(cell_size > 0.0)) throw ParameterError("cell_size must be > 0");
  GridSpec g;
  g.x0 = extent.x0;
  g.y0 = extent.y0;
  g.cell_size = cell_size;
  g.n_cols = static_cast<std::size_t>(std::ceil(extent.width() / cell_size - 1e-9));
  g.n_rows = static_cast<std::size_t>(std::ceil(extent.height() / cell_size - 1e-9));
  return g;
}

BathyGrid coarsen(const BathyGrid& grid, std::size_t factor) {
  if (factor == 0) throw ParameterError("factor must be > 0");
  const GridSpec& s = grid.spec();
  GridSpec c = s;
  c.cell_size = s.cell_size * static_cast<double>(factor);
  c.n_cols = (s.n_cols + factor - 1) / factor;
  c.n_rows = (s.n_rows + factor - 1) / factor;
  BathyGrid out{Raster(c, kNoData), Raster(c, kNoData), Raster(c, 0.0)};
  for (std::size_t row = 0; row < c.n_rows; ++row) {
    for (std::size_t col = 0; col < c.n_cols; ++col) {
      Neumaier zn, cn;
      double n = 0.0;
      for (std::size_t r = row * factor; r < std::min(s.n_rows, (row + 1) * factor); ++r) {
        for (std::size_t q = col * factor; q < std::min(s.n_cols, (col + 1) * factor); ++q) {
          const double k = grid.count.at(q, r);
          if (k <= 0.0) continue;
          zn.add(grid.depth.at(q, r) * k);
          cn.add(grid.confidence.at(q, r) * k);
          n += k;
        }
      }
      if (n <= 0.0) continue;
      out.depth.at(col, row) = zn.value() / n;
      out.confidence.at(col, row) = cn.value() / n;
      out.count.at(col, row) = n;
    }
  }
  return out;
}

void write_bathy_grid(const std::filesystem::path& prefix, const BathyGrid& grid) {
  const std::string p = prefix.string();
  write_raster(p + ".depth.grid", grid.depth, {{"quantity", "depth"}});
  write_raster(p + ".confidence.grid", grid.confidence, {{"quantity", "confidence"}});
  write_raster(p + ".count.grid", grid.count, {{"quantity", "count"}});
}

BathyGrid read_bathy_grid(const std::filesystem::path& prefix) {
  const std::string p = prefix.string();
  BathyGrid g{read_raster(p + ".depth.grid"), read_raster(p + ".confidence.grid"), read_raster(p + ".count.grid")};
  if (!g.depth.spec().same_geometry(g.confidence.spec()) || !g.depth.spec().same_geometry(g.count.spec())) {
    throw IoError("bathymetry rasters under " + p + " differ in geometry");
  }
  return g;
}

void write_points(const std::filesystem::path& path, std::span<const PointEstimate> points) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const nlohmann::json header = {{"format", "sssbathy-points"}, {"version", 1}, {"count", points.size()},
                                 {"byte_order", "LE"}};
  os << header.dump() << '\n';
  std::vector<double> f(4);
  std::vector<double> ids(4);
  for (const auto& p : points) {
    f = {p.point.x(), p.point.y(), p.point.z(), p.confidence};
    write_f64_le(os, f);
    // Integer fields travel as doubles; all values are far below 2^53.
    ids = {static_cast<double>(p.provenance.line_id), static_cast<double>(static_cast<int>(p.provenance.side)),
           static_cast<double>(p.provenance.ping), static_cast<double>(p.provenance.bin)};
    write_f64_le(os, ids);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<PointEstimate> read_points(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed points header in " + path.string());
  }
  if (header.value("format", "") != "sssbathy-points") throw IoError("not a points file: " + path.string());
  const auto count = header.at("count").get<std::size_t>();
  const auto raw = read_f64_le(is, count * 8);
  std::vector<PointEstimate> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double* r = raw.data() + i * 8;
    out[i].point = Vec3(r[0], r[1], r[2]);
    out[i].confidence = r[3];
    out[i].provenance = {static_cast<int>(r[4]), static_cast<Side>(static_cast<int>(r[5])),
                         static_cast<std::size_t>(r[6]), static_cast<std::size_t>(r[7])};
  }
  return out;
}

}  // namespace sssbathy
