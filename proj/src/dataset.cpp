#include "sssbathy/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include <spdlog/spdlog.h>

#include "sssbathy/error.hpp"
#include "sssbathy/raster.hpp"
#include "sssbathy/rng.hpp"

namespace sssbathy {

AltimeterTrack make_track(const SurveyLine& line, std::span<const double> altimeter) {
  if (altimeter.size() != line.poses.size()) throw ParameterError("one altimeter reading per ping is required");
  AltimeterTrack t;
  t.line_id = line.line_id;
  t.points.reserve(line.poses.size());
  for (std::size_t k = 0; k < line.poses.size(); ++k) {
    Vec3 p = line.poses[k].position;
    p.z() -= altimeter[k];
    t.points.push_back(p);
  }
  return t;
}

DrapeResult drape_ground_truth(const Heightfield& hf, std::span<const SonarPose> poses, const SonarParams& params,
                               Side side, const SimConfig& config) {
  params.validate();
  DrapeResult out{Array2D<double>(poses.size(), params.n_bins, 0.0),
                  Array2D<BinStatus>(poses.size(), params.n_bins, BinStatus::Missing)};
  std::vector<double> ranges(params.n_bins);
  for (std::size_t b = 0; b < params.n_bins; ++b) ranges[b] = bin_to_slant_range(b, params);
  const double step = std::min(config.profile_step, 0.5 * params.bin_width());
  std::vector<ArcHit> hits;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    AcrossTrackProfile profile(hf, poses[k], side, params.max_range, step);
    const auto status = profile.intersect_sorted(ranges, hits);
    for (std::size_t b = 0; b < params.n_bins; ++b) {
      out.mask(k, b) = status[b];
      if (status[b] == BinStatus::Valid) out.gt(k, b) = poses[k].position.z() - hits[b].z;
    }
  }
  return out;
}

double half_ping_spacing(std::span<const SonarPose> poses) {
  if (poses.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t k = 1; k < poses.size(); ++k) {
    total += (poses[k].position - poses[k - 1].position).head<2>().norm();
  }
  return 0.5 * total / static_cast<double>(poses.size() - 1);
}

Array2D<double> associate_sparse_depth(std::span<const AltimeterTrack> tracks, std::span<const SonarPose> poses,
                                       const SonarParams& params, Side side, double slab_half_width,
                                       const Heightfield* hf, double profile_step) {
  params.validate();
  if (!(slab_half_width >= 0.0)) throw ParameterError("slab half-width must be >= 0");
  Array2D<double> sparse(poses.size(), params.n_bins, 0.0);
  Array2D<double> best_along(poses.size(), params.n_bins, std::numeric_limits<double>::infinity());
  const double step = std::min(profile_step, 0.5 * params.bin_width());
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const Vec3& s = poses[k].position;
    const Vec3 a = along_track_direction(poses[k].heading);
    const Vec3 u = side_direction(poses[k].heading, side);
    std::optional<AcrossTrackProfile> profile;
    for (const auto& track : tracks) {
      for (const Vec3& q : track.points) {
        const Vec3 d = q - s;
        const double along = std::abs(d.x() * a.x() + d.y() * a.y());
        if (along > slab_half_width) continue;
        const double across = d.x() * u.x() + d.y() * u.y();
        if (across < -slab_half_width) continue;
        const double dz = s.z() - q.z();
        if (!(dz > 0.0)) continue;
        const double range = d.norm();
        const std::size_t bin = slant_range_to_bin(range, params);
        if (bin >= params.n_bins) continue;
        if (!(along < best_along(k, bin))) continue;
        if (hf) {
          if (!profile) profile.emplace(*hf, poses[k], side, params.max_range, step);
          const auto hit = profile->intersect(range);
          // The first return must come from the sounding itself, up to the slab offset.
          if (!hit || std::abs(hit->ground_range - std::max(0.0, across)) > slab_half_width + params.bin_width()) {
            continue;
          }
        }
        best_along(k, bin) = along;
        sparse(k, bin) = dz;
      }
    }
  }
  return sparse;
}

void WaterfallSet::validate() const {
  intensity.validate();
  const auto r = intensity.n_pings(), c = intensity.n_bins();
  for (const auto* g : {&sparse_depth, &gt_depth}) {
    if (g->rows() != r || g->cols() != c) throw ParameterError("waterfall set grids differ in shape");
  }
  if (mask.rows() != r || mask.cols() != c) throw ParameterError("waterfall set mask differs in shape");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool valid = mask.data()[i] == BinStatus::Valid;
    if (!valid && sparse_depth.data()[i] != 0.0) throw ParameterError("sparse depth present on an invalid bin");
    if (valid && !(gt_depth.data()[i] > 0.0)) throw ParameterError("ground truth must be > 0 on valid bins");
  }
}

WaterfallSet build_waterfall_set(const Heightfield& hf, const WaterfallImage& wf, std::span<const AltimeterTrack> tracks,
                                 const SimConfig& config, double slab_half_width) {
  wf.validate();
  WaterfallSet ws;
  ws.intensity = wf;
  auto drape = drape_ground_truth(hf, wf.poses, wf.params, wf.side, config);
  ws.gt_depth = std::move(drape.gt);
  ws.mask = std::move(drape.mask);
  for (std::size_t i = 0; i < ws.mask.size(); ++i) {
    // Merge with the sensor-side status; with identical profile sampling these agree.
    if (wf.status.data()[i] != BinStatus::Valid && ws.mask.data()[i] == BinStatus::Valid) {
      ws.mask.data()[i] = wf.status.data()[i];
    }
    if (ws.mask.data()[i] == BinStatus::Valid && !(ws.gt_depth.data()[i] > 0.0)) {
      ws.mask.data()[i] = BinStatus::Missing;
    }
    if (ws.mask.data()[i] != BinStatus::Valid) ws.gt_depth.data()[i] = 0.0;
  }
  const double slab = slab_half_width > 0.0 ? slab_half_width : half_ping_spacing(wf.poses);
  ws.sparse_depth = associate_sparse_depth(tracks, wf.poses, wf.params, wf.side, slab, &hf, config.profile_step);
  for (std::size_t i = 0; i < ws.mask.size(); ++i) {
    if (ws.mask.data()[i] != BinStatus::Valid) ws.sparse_depth.data()[i] = 0.0;
  }
  return ws;
}

std::size_t WindowSample::valid_count() const {
  std::size_t n = 0;
  for (auto m : mask.data()) n += m != 0;
  return n;
}

namespace {

double median(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

DownsampledSet downsample_columns(const WaterfallSet& ws, std::size_t width) {
  const std::size_t n_bins = ws.intensity.n_bins();
  if (width == 0 || width > n_bins) throw ParameterError("window width must be in [1, n_bins]");
  if (n_bins % width != 0) throw ParameterError("n_bins must be a multiple of the window width");
  const std::size_t block = n_bins / width;
  const std::size_t rows = ws.intensity.n_pings();

  DownsampledSet ds;
  ds.line_id = ws.line_id();
  ds.side = ws.side();
  ds.params = ws.intensity.params;
  ds.params.n_bins = width;
  ds.intensity = Array2D<double>(rows, width, 0.0);
  ds.sparse = Array2D<double>(rows, width, 0.0);
  ds.target = Array2D<double>(rows, width, 0.0);
  ds.mask = Array2D<std::uint8_t>(rows, width, 0);

  std::vector<double> depths, sparse;
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t j = 0; j < width; ++j) {
      double sum = 0.0;
      depths.clear();
      sparse.clear();
      for (std::size_t b = j * block; b < (j + 1) * block; ++b) {
        sum += ws.intensity.intensities(k, b);
        if (ws.mask(k, b) != BinStatus::Valid) continue;
        depths.push_back(ws.gt_depth(k, b));
        if (ws.sparse_depth(k, b) != 0.0) sparse.push_back(ws.sparse_depth(k, b));
      }
      ds.intensity(k, j) = sum / static_cast<double>(block);
      if (2 * depths.size() >= block && !depths.empty()) {
        ds.mask(k, j) = 1;
        ds.target(k, j) = median(depths);
        if (!sparse.empty()) ds.sparse(k, j) = median(sparse);
      }
    }
  }
  return ds;
}

std::size_t window_stride(std::size_t height, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw ParameterError("overlap must be in [0, 1)");
  const auto s = static_cast<long long>(std::llround(static_cast<double>(height) * (1.0 - overlap)));
  return static_cast<std::size_t>(std::max(1LL, s));
}

WindowSample flip_window(const WindowSample& w) {
  WindowSample out = w;
  const std::size_t h = w.height();
  for (std::size_t r = 0; r < h; ++r) {
    std::copy(w.intensity.row(r).begin(), w.intensity.row(r).end(), out.intensity.row(h - 1 - r).begin());
    std::copy(w.sparse.row(r).begin(), w.sparse.row(r).end(), out.sparse.row(h - 1 - r).begin());
    std::copy(w.target.row(r).begin(), w.target.row(r).end(), out.target.row(h - 1 - r).begin());
    std::copy(w.mask.row(r).begin(), w.mask.row(r).end(), out.mask.row(h - 1 - r).begin());
  }
  out.provenance.flipped = !w.provenance.flipped;
  return out;
}

WindowSample normalize_intensity(const WindowSample& w) {
  WindowSample out = w;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < w.intensity.size(); ++i) {
    if (!w.mask.data()[i]) continue;
    sum += w.intensity.data()[i];
    ++n;
  }
  auto& v = out.intensity.data();
  if (n == 0) {
    std::fill(v.begin(), v.end(), 0.0);
    return out;
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < w.intensity.size(); ++i) {
    if (!w.mask.data()[i]) continue;
    const double d = w.intensity.data()[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    std::fill(v.begin(), v.end(), 0.0);
    return out;
  }
  for (double& x : v) x = (x - mean) / sd;
  return out;
}

std::vector<WindowSample> make_windows(const DownsampledSet& ds, const WindowConfig& cfg) {
  if (cfg.height == 0 || cfg.width == 0) throw ParameterError("window size must be non-empty");
  if (ds.intensity.cols() != cfg.width) throw ParameterError("downsampled width does not match the window width");
  const std::size_t rows = ds.intensity.rows();
  const std::size_t stride = window_stride(cfg.height, cfg.overlap);
  std::vector<WindowSample> out;
  if (rows < cfg.height) {
    spdlog::warn("line {} {}: {} pings is shorter than the window height {}; no windows", ds.line_id,
                 to_string(ds.side), rows, cfg.height);
    return out;
  }
  for (std::size_t off = 0; off + cfg.height <= rows; off += stride) {
    WindowSample w;
    w.intensity = Array2D<double>(cfg.height, cfg.width);
    w.sparse = Array2D<double>(cfg.height, cfg.width);
    w.target = Array2D<double>(cfg.height, cfg.width);
    w.mask = Array2D<std::uint8_t>(cfg.height, cfg.width);
    for (std::size_t r = 0; r < cfg.height; ++r) {
      std::copy_n(ds.intensity.row(off + r).begin(), cfg.width, w.intensity.row(r).begin());
      std::copy_n(ds.sparse.row(off + r).begin(), cfg.width, w.sparse.row(r).begin());
      std::copy_n(ds.target.row(off + r).begin(), cfg.width, w.target.row(r).begin());
      std::copy_n(ds.mask.row(off + r).begin(), cfg.width, w.mask.row(r).begin());
    }
    w.provenance = {ds.line_id, ds.side, off, false};
    w.params = ds.params;
    if (cfg.normalize) w = normalize_intensity(w);
    if (cfg.augment_flip) {
      WindowSample f = flip_window(w);
      out.push_back(std::move(w));
      out.push_back(std::move(f));
    } else {
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<WindowSample> make_windows(const WaterfallSet& ws, const WindowConfig& config) {
  if (config.height > ws.intensity.n_pings()) {
    spdlog::warn("line {} {}: {} pings is shorter than the window height {}; no windows", ws.line_id(),
                 to_string(ws.side()), ws.intensity.n_pings(), config.height);
    return {};
  }
  return make_windows(downsample_columns(ws, config.width), config);
}

LineSplit split_lines(std::span<const SurveyLine> lines, std::uint64_t seed, std::size_t n_val, std::size_t n_test) {
  std::vector<int> ew, ns;
  for (const auto& l : lines) (l.orientation == LineOrientation::EastWest ? ew : ns).push_back(l.line_id);
  std::sort(ew.begin(), ew.end());
  std::sort(ns.begin(), ns.end());
  // Without an orthogonal set, both held-out groups come from the same lines.
  std::vector<int>& val_pool = ew.empty() ? ns : ew;
  std::vector<int>& test_pool = ns.empty() ? ew : ns;

  Rng rng(derive_seed({seed, 0x5711ULL}));
  auto take = [&rng](std::vector<int>& pool, std::size_t n) {
    std::vector<int> picked;
    for (std::size_t i = 0; i < n; ++i) {
      if (pool.empty()) throw ParameterError("not enough survey lines to hold out");
      // Interior lines have neighbors on both sides; fall back to any line.
      const std::size_t lo = pool.size() > 2 ? 1 : 0;
      const std::size_t span = pool.size() > 2 ? pool.size() - 2 : pool.size();
      const std::size_t idx = lo + static_cast<std::size_t>(rng.below(span));
      picked.push_back(pool[idx]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    std::sort(picked.begin(), picked.end());
    return picked;
  };
  LineSplit s;
  s.val = take(val_pool, n_val);
  s.test = take(test_pool, n_test);
  for (const auto& l : lines) {
    const int id = l.line_id;
    if (std::find(s.val.begin(), s.val.end(), id) == s.val.end() &&
        std::find(s.test.begin(), s.test.end(), id) == s.test.end()) {
      s.train.push_back(id);
    }
  }
  std::sort(s.train.begin(), s.train.end());
  if (s.train.empty()) throw ParameterError("split leaves no training lines");
  return s;
}

nlohmann::json split_to_json(const LineSplit& s) { return {{"train", s.train}, {"val", s.val}, {"test", s.test}}; }

LineSplit split_from_json(const nlohmann::json& j) {
  LineSplit s;
  s.train = j.at("train").get<std::vector<int>>();
  s.val = j.at("val").get<std::vector<int>>();
  s.test = j.at("test").get<std::vector<int>>();
  return s;
}

std::string waterfall_stem(int line_id, Side side) {
  return "line" + std::to_string(line_id) + "_" + std::string(to_string(side));
}

namespace {

Raster to_raster(const Array2D<double>& a) {
  Raster r(GridSpec{0.0, 0.0, 1.0, a.cols(), a.rows()}, 0.0);
  r.values() = a;
  return r;
}

}  // namespace

void write_waterfall_set(const std::filesystem::path& dir, const WaterfallSet& ws) {
  ws.validate();
  std::filesystem::create_directories(dir);
  const std::string stem = waterfall_stem(ws.line_id(), ws.side());
  write_waterfall(dir / stem, ws.intensity);
  Array2D<double> mask(ws.mask.rows(), ws.mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) mask.data()[i] = static_cast<double>(ws.mask.data()[i]);
  write_raster(dir / (stem + ".intensity.grid"), to_raster(ws.intensity.intensities), {{"kind", "intensity"}});
  write_raster(dir / (stem + ".sparse.grid"), to_raster(ws.sparse_depth), {{"kind", "sparse_depth"}});
  write_raster(dir / (stem + ".gt.grid"), to_raster(ws.gt_depth), {{"kind", "gt_depth"}});
  write_raster(dir / (stem + ".mask.grid"), to_raster(mask), {{"kind", "mask"}});
}

WaterfallSet read_waterfall_set(const std::filesystem::path& dir, int line_id, Side side) {
  const std::string stem = waterfall_stem(line_id, side);
  WaterfallSet ws;
  ws.intensity = read_waterfall(dir / stem);
  ws.sparse_depth = read_raster(dir / (stem + ".sparse.grid")).values();
  ws.gt_depth = read_raster(dir / (stem + ".gt.grid")).values();
  const auto mask = read_raster(dir / (stem + ".mask.grid")).values();
  ws.mask = Array2D<BinStatus>(mask.rows(), mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    ws.mask.data()[i] = static_cast<BinStatus>(static_cast<std::uint8_t>(mask.data()[i]));
  }
  ws.validate();
  return ws;
}

}  // namespace sssbathy
