#include "sssbathy/sonar_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <thread>

#include "sssbathy/error.hpp"
#include "sssbathy/raster.hpp"
#include "sssbathy/rng.hpp"

namespace sssbathy {

void WaterfallImage::validate() const {
  if (poses.size() != intensities.rows()) throw ParameterError("waterfall rows do not match the pose list");
  if (status.rows() != intensities.rows() || status.cols() != intensities.cols()) {
    throw ParameterError("waterfall status grid does not match intensities");
  }
  if (intensities.cols() != params.n_bins) throw ParameterError("waterfall columns do not match n_bins");
}

PingReturn simulate_ping_clean(const Heightfield& hf, const SonarPose& pose, const SonarParams& params, Side side,
                               const SimConfig& config) {
  pose.validate();
  params.validate();
  const double step = std::min(config.profile_step, 0.5 * params.bin_width());
  AcrossTrackProfile profile(hf, pose, side, params.max_range, step);

  std::vector<double> ranges(params.n_bins);
  for (std::size_t b = 0; b < params.n_bins; ++b) ranges[b] = bin_to_slant_range(b, params);
  std::vector<ArcHit> hits;
  PingReturn out;
  out.status = profile.intersect_sorted(ranges, hits);
  out.intensity.assign(params.n_bins, 0.0);
  for (std::size_t b = 0; b < params.n_bins; ++b) {
    if (out.status[b] != BinStatus::Valid || !hits[b].visible || hits[b].cos_incidence <= 0.0) continue;
    out.intensity[b] = config.reflectivity * std::pow(hits[b].cos_incidence, config.lambert_exponent);
  }
  return out;
}

double speckle_multiplier(Rng& rng, double sigma) {
  static const double mean = std::sqrt(std::numbers::pi / 2.0);
  static const double sd = std::sqrt((4.0 - std::numbers::pi) / 2.0);
  return std::max(0.0, 1.0 + sigma * (rng.rayleigh() - mean) / sd);
}

PingReturn simulate_ping(const Heightfield& hf, const SonarPose& pose, const SonarParams& params, Side side,
                         std::uint64_t noise_seed, const SimConfig& config) {
  PingReturn out = simulate_ping_clean(hf, pose, params, side, config);
  if (config.speckle_sigma > 0.0) {
    Rng rng(noise_seed);
    // One draw per bin regardless of status keeps streams aligned across scenes.
    for (double& v : out.intensity) v *= speckle_multiplier(rng, config.speckle_sigma);
  }
  return out;
}

double altimeter(const Heightfield& hf, const SonarPose& pose, double noise_std, double bias,
                 std::uint64_t noise_seed) {
  const auto seabed = sample_depth(hf, pose.position.x(), pose.position.y());
  if (!seabed) throw ParameterError("altimeter nadir outside the heightfield");
  double reading = pose.position.z() - *seabed + bias;
  if (noise_std > 0.0) {
    Rng rng(noise_seed);
    reading += noise_std * rng.normal();
  }
  return reading;
}

LineSimulation simulate_line(const Heightfield& hf, const SurveyLine& line, const SonarParams& params,
                             std::uint64_t seed, const SimConfig& config) {
  params.validate();
  const std::size_t n = line.poses.size();
  if (n < 2) throw ParameterError("survey line needs at least 2 pings");

  LineSimulation sim;
  for (Side s : {Side::Port, Side::Starboard}) {
    WaterfallImage& wf = s == Side::Port ? sim.port : sim.starboard;
    wf.line_id = line.line_id;
    wf.side = s;
    wf.params = params;
    wf.poses = line.poses;
    wf.intensities = Array2D<double>(n, params.n_bins, 0.0);
    wf.status = Array2D<BinStatus>(n, params.n_bins, BinStatus::Missing);
  }
  sim.altimeter.assign(n, 0.0);

  const auto line_key = static_cast<std::uint64_t>(static_cast<std::int64_t>(line.line_id));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      for (Side s : {Side::Port, Side::Starboard}) {
        const auto ping_seed = derive_seed({seed, line_key, static_cast<std::uint64_t>(s), k});
        const PingReturn ret = simulate_ping(hf, line.poses[k], params, s, ping_seed, config);
        WaterfallImage& wf = s == Side::Port ? sim.port : sim.starboard;
        std::copy(ret.intensity.begin(), ret.intensity.end(), wf.intensities.row(k).begin());
        std::copy(ret.status.begin(), ret.status.end(), wf.status.row(k).begin());
      }
      sim.altimeter[k] = altimeter(hf, line.poses[k], config.altimeter_noise_std, config.altimeter_bias,
                                   derive_seed({seed, line_key, 0xa17ULL, k}));
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    run(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(run, b, e);
    }
  }
  return sim;
}

nlohmann::json params_to_json(const SonarParams& p) {
  return {{"sound_speed", p.sound_speed},
          {"max_range", p.max_range},
          {"n_bins", p.n_bins},
          {"vertical_beamwidth", p.vertical_beamwidth},
          {"horizontal_beamwidth", p.horizontal_beamwidth}};
}

SonarParams params_from_json(const nlohmann::json& j) {
  SonarParams p;
  p.sound_speed = j.value("sound_speed", p.sound_speed);
  p.max_range = j.value("max_range", p.max_range);
  p.n_bins = j.value("n_bins", p.n_bins);
  p.vertical_beamwidth = j.value("vertical_beamwidth", p.vertical_beamwidth);
  p.horizontal_beamwidth = j.value("horizontal_beamwidth", p.horizontal_beamwidth);
  p.validate();
  return p;
}

nlohmann::json poses_to_json(const std::vector<SonarPose>& poses) {
  auto arr = nlohmann::json::array();
  for (const auto& p : poses) {
    arr.push_back({p.position.x(), p.position.y(), p.position.z(), p.heading, p.altitude});
  }
  return arr;
}

std::vector<SonarPose> poses_from_json(const nlohmann::json& j) {
  std::vector<SonarPose> poses;
  poses.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 5) throw IoError("pose entries must be [x, y, z, heading, altitude]");
    SonarPose p;
    p.position = Vec3(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
    p.heading = e[3].get<double>();
    p.altitude = e[4].get<double>();
    poses.push_back(p);
  }
  return poses;
}

void write_waterfall(const std::filesystem::path& stem, const WaterfallImage& wf) {
  wf.validate();
  nlohmann::json meta = {{"line_id", wf.line_id},
                         {"side", to_string(wf.side)},
                         {"n_pings", wf.n_pings()},
                         {"n_bins", wf.n_bins()},
                         {"byte_order", "LE"},
                         {"dtype", "f32"},
                         {"payload", stem.filename().string() + ".f32"},
                         {"status_payload", stem.filename().string() + ".status.u8"},
                         {"params", params_to_json(wf.params)},
                         {"poses", poses_to_json(wf.poses)}};
  {
    std::ofstream os(stem.string() + ".json", std::ios::trunc);
    if (!os) throw IoError("cannot write " + stem.string() + ".json");
    os << meta.dump(1) << '\n';
  }
  {
    std::ofstream os(stem.string() + ".f32", std::ios::binary | std::ios::trunc);
    write_f32_le(os, wf.intensities.data());
  }
  {
    std::ofstream os(stem.string() + ".status.u8", std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(wf.status.data().data()),
             static_cast<std::streamsize>(wf.status.size()));
  }
}

WaterfallImage read_waterfall(const std::filesystem::path& stem) {
  std::ifstream ms(stem.string() + ".json");
  if (!ms) throw IoError("cannot open " + stem.string() + ".json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ms);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("malformed waterfall metadata: ") + e.what());
  }
  WaterfallImage wf;
  wf.line_id = meta.at("line_id").get<int>();
  wf.side = side_from_string(meta.at("side").get<std::string>());
  wf.params = params_from_json(meta.at("params"));
  wf.poses = poses_from_json(meta.at("poses"));
  const auto rows = meta.at("n_pings").get<std::size_t>();
  const auto cols = meta.at("n_bins").get<std::size_t>();
  wf.intensities = Array2D<double>(rows, cols);
  wf.status = Array2D<BinStatus>(rows, cols);
  {
    std::ifstream is(stem.string() + ".f32", std::ios::binary);
    if (!is) throw IoError("missing waterfall payload for " + stem.string());
    wf.intensities.data() = read_f32_le(is, rows * cols);
  }
  {
    std::ifstream is(stem.string() + ".status.u8", std::ios::binary);
    if (!is) throw IoError("missing waterfall status payload for " + stem.string());
    is.read(reinterpret_cast<char*>(wf.status.data().data()), static_cast<std::streamsize>(rows * cols));
    if (static_cast<std::size_t>(is.gcount()) != rows * cols) throw IoError("truncated status payload");
  }
  wf.validate();
  return wf;
}

}  // namespace sssbathy
