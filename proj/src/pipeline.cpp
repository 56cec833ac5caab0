#include "sssbathy/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <spdlog/spdlog.h>

#include "sssbathy/error.hpp"
#include "sssbathy/rng.hpp"

namespace sssbathy {

namespace {

using nlohmann::json;

json spectrum_to_json(const SpectrumParams& s) {
  return {{"n_waves", s.n_waves},     {"amplitude", s.amplitude}, {"min_wavelength", s.min_wavelength},
          {"max_wavelength", s.max_wavelength}, {"exponent", s.exponent}, {"band_low", s.band_low},
          {"band_high", s.band_high}, {"offset", s.offset}};
}

SpectrumParams spectrum_from_json(const json& j) {
  SpectrumParams s;
  s.n_waves = j.value("n_waves", s.n_waves);
  s.amplitude = j.value("amplitude", s.amplitude);
  s.min_wavelength = j.value("min_wavelength", s.min_wavelength);
  s.max_wavelength = j.value("max_wavelength", s.max_wavelength);
  s.exponent = j.value("exponent", s.exponent);
  s.band_low = j.value("band_low", s.band_low);
  s.band_high = j.value("band_high", s.band_high);
  s.offset = j.value("offset", s.offset);
  return s;
}

std::string kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::Hill: return "hill";
    case FeatureKind::Boulder: return "boulder";
    case FeatureKind::Ripple: return "ripple";
  }
  return "hill";
}

FeatureKind kind_from_name(const std::string& s) {
  if (s == "hill") return FeatureKind::Hill;
  if (s == "boulder") return FeatureKind::Boulder;
  if (s == "ripple") return FeatureKind::Ripple;
  throw ParameterError("unknown feature kind '" + s + "'");
}

json feature_to_json(const Feature& f) {
  return {{"kind", kind_name(f.kind)}, {"cx", f.cx},         {"cy", f.cy},
          {"radius", f.radius},        {"height", f.height}, {"wavelength", f.wavelength},
          {"direction", f.direction}};
}

Feature feature_from_json(const json& j) {
  Feature f;
  f.kind = kind_from_name(j.value("kind", std::string("hill")));
  f.cx = j.value("cx", f.cx);
  f.cy = j.value("cy", f.cy);
  f.radius = j.value("radius", f.radius);
  f.height = j.value("height", f.height);
  f.wavelength = j.value("wavelength", f.wavelength);
  f.direction = j.value("direction", f.direction);
  return f;
}

json sim_to_json(const SimConfig& s) {
  return {{"reflectivity", s.reflectivity},       {"lambert_exponent", s.lambert_exponent},
          {"speckle_sigma", s.speckle_sigma},     {"profile_step", s.profile_step},
          {"altimeter_noise_std", s.altimeter_noise_std}, {"altimeter_bias", s.altimeter_bias},
          {"threads", s.threads}};
}

SimConfig sim_from_json(const json& j) {
  SimConfig s;
  s.reflectivity = j.value("reflectivity", s.reflectivity);
  s.lambert_exponent = j.value("lambert_exponent", s.lambert_exponent);
  s.speckle_sigma = j.value("speckle_sigma", s.speckle_sigma);
  s.profile_step = j.value("profile_step", s.profile_step);
  s.altimeter_noise_std = j.value("altimeter_noise_std", s.altimeter_noise_std);
  s.altimeter_bias = j.value("altimeter_bias", s.altimeter_bias);
  s.threads = j.value("threads", s.threads);
  return s;
}

json window_to_json(const WindowConfig& w) {
  return {{"height", w.height}, {"width", w.width}, {"overlap", w.overlap}, {"augment_flip", w.augment_flip},
          {"normalize", w.normalize}};
}

WindowConfig window_from_json(const json& j) {
  WindowConfig w;
  w.height = j.value("height", w.height);
  w.width = j.value("width", w.width);
  w.overlap = j.value("overlap", w.overlap);
  w.augment_flip = j.value("augment_flip", w.augment_flip);
  w.normalize = j.value("normalize", w.normalize);
  return w;
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  const json& s = j.at(key);
  if (!s.is_object()) throw ParameterError(std::string("config section '") + key + "' must be an object");
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    throw ParameterError("unsupported config schema_version " + std::to_string(schema_version));
  }
  if (!(scene.region.width > 0.0 && scene.region.height > 0.0)) throw ParameterError("scene region must be non-empty");
  if (!(scene.cell_size > 0.0)) throw ParameterError("scene.cell_size must be > 0");
  if (!(survey.line_spacing > 0.0)) throw ParameterError("survey.line_spacing must be > 0");
  sonar.validate();
  model.validate();
  optim.validate();
  if (ensemble_k == 0) throw ParameterError("ensemble_k must be >= 1");
  if (ensemble_k > optim.epochs) throw ParameterError("ensemble_k exceeds the number of epochs");
  if (!(fusion.cell_size > 0.0)) throw ParameterError("fusion.cell_size must be > 0");
  if (!(sparse_fraction >= 0.0 && sparse_fraction <= 1.0)) throw ParameterError("sparse_fraction must be in [0, 1]");
  if (!(dataset.window.overlap >= 0.0 && dataset.window.overlap < 1.0)) {
    throw ParameterError("dataset.window.overlap must be in [0, 1)");
  }
  if (!(dataset.test_overlap >= 0.0 && dataset.test_overlap < 1.0)) {
    throw ParameterError("dataset.test_overlap must be in [0, 1)");
  }
}

json config_to_json(const ExperimentConfig& c) {
  json features = json::array();
  for (const auto& f : c.scene.features) features.push_back(feature_to_json(f));
  return {
      {"schema_version", c.schema_version},
      {"seed", c.seed},
      {"scene",
       {{"region", {{"x0", c.scene.region.x0}, {"y0", c.scene.region.y0}, {"width", c.scene.region.width},
                    {"height", c.scene.region.height}}},
        {"cell_size", c.scene.cell_size},
        {"spectrum", spectrum_to_json(c.scene.spectrum)},
        {"n_hills", c.scene.n_hills},
        {"n_boulders", c.scene.n_boulders},
        {"n_ripple_fields", c.scene.n_ripple_fields},
        {"features", features}}},
      {"survey",
       {{"line_spacing", c.survey.line_spacing}, {"inset", c.survey.inset}, {"end_inset", c.survey.end_inset},
        {"sensor_depth", c.survey.sensor_depth}, {"speed", c.survey.speed}, {"ping_rate", c.survey.ping_rate},
        {"cross_lines", c.survey.cross_lines}}},
      {"sonar", params_to_json(c.sonar)},
      {"sim", sim_to_json(c.sim)},
      {"dataset",
       {{"window", window_to_json(c.dataset.window)}, {"test_overlap", c.dataset.test_overlap},
        {"n_val", c.dataset.n_val}, {"n_test", c.dataset.n_test}, {"slab_half_width", c.dataset.slab_half_width}}},
      {"model", c.model.to_json()},
      {"optim", c.optim.to_json()},
      {"ensemble_k", c.ensemble_k},
      {"fusion",
       {{"cell_size", c.fusion.cell_size}, {"outlier", c.fusion.outlier.to_json()}, {"threads", c.fusion.threads}}},
      {"sparse_fraction", c.sparse_fraction},
      {"ablation_fractions", c.ablation_fractions},
  };
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  ExperimentConfig c;
  try {
    c.schema_version = j.value("schema_version", kSchemaVersion);
    c.seed = j.value("seed", c.seed);

    const json& scene = section(j, "scene");
    const json& region = section(scene, "region");
    c.scene.region.x0 = region.value("x0", c.scene.region.x0);
    c.scene.region.y0 = region.value("y0", c.scene.region.y0);
    c.scene.region.width = region.value("width", c.scene.region.width);
    c.scene.region.height = region.value("height", c.scene.region.height);
    c.scene.cell_size = scene.value("cell_size", c.scene.cell_size);
    if (scene.contains("spectrum")) c.scene.spectrum = spectrum_from_json(scene.at("spectrum"));
    c.scene.n_hills = scene.value("n_hills", c.scene.n_hills);
    c.scene.n_boulders = scene.value("n_boulders", c.scene.n_boulders);
    c.scene.n_ripple_fields = scene.value("n_ripple_fields", c.scene.n_ripple_fields);
    if (scene.contains("features")) {
      for (const auto& f : scene.at("features")) c.scene.features.push_back(feature_from_json(f));
    }

    const json& survey = section(j, "survey");
    c.survey.line_spacing = survey.value("line_spacing", c.survey.line_spacing);
    c.survey.inset = survey.value("inset", c.survey.inset);
    c.survey.end_inset = survey.value("end_inset", c.survey.end_inset);
    c.survey.sensor_depth = survey.value("sensor_depth", c.survey.sensor_depth);
    c.survey.speed = survey.value("speed", c.survey.speed);
    c.survey.ping_rate = survey.value("ping_rate", c.survey.ping_rate);
    c.survey.cross_lines = survey.value("cross_lines", c.survey.cross_lines);

    if (j.contains("sonar")) c.sonar = params_from_json(j.at("sonar"));
    if (j.contains("sim")) c.sim = sim_from_json(j.at("sim"));

    const json& ds = section(j, "dataset");
    if (ds.contains("window")) c.dataset.window = window_from_json(ds.at("window"));
    c.dataset.test_overlap = ds.value("test_overlap", c.dataset.test_overlap);
    c.dataset.n_val = ds.value("n_val", c.dataset.n_val);
    c.dataset.n_test = ds.value("n_test", c.dataset.n_test);
    c.dataset.slab_half_width = ds.value("slab_half_width", c.dataset.slab_half_width);

    if (j.contains("model")) c.model = nn::FcnConfig::from_json(j.at("model"));
    if (j.contains("optim")) c.optim = OptimConfig::from_json(j.at("optim"));
    c.ensemble_k = j.value("ensemble_k", c.ensemble_k);

    const json& fusion = section(j, "fusion");
    c.fusion.cell_size = fusion.value("cell_size", c.fusion.cell_size);
    if (fusion.contains("outlier")) c.fusion.outlier = OutlierFilter::from_json(fusion.at("outlier"));
    c.fusion.threads = fusion.value("threads", c.fusion.threads);

    c.sparse_fraction = j.value("sparse_fraction", c.sparse_fraction);
    if (j.contains("ablation_fractions")) c.ablation_fractions = j.at("ablation_fractions").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

void apply_override(json& j, const std::string& dotted_path, const std::string& value) {
  if (dotted_path.empty()) throw ParameterError("empty override key");
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ParameterError("malformed override key '" + dotted_path + "'");
    if (!node->is_object()) throw ParameterError("override '" + dotted_path + "' descends into a non-object");
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::exception&) {
        parsed = value;
      }
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

// --- stages ---------------------------------------------------------------------

std::vector<Feature> random_features(const SceneConfig& scene, std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0xfea7ULL}));
  const Region& r = scene.region;
  auto place = [&](Feature& f) {
    f.cx = rng.uniform(r.x0, r.x0 + r.width);
    f.cy = rng.uniform(r.y0, r.y0 + r.height);
  };
  std::vector<Feature> out;
  for (std::size_t i = 0; i < scene.n_hills; ++i) {
    Feature f;
    f.kind = FeatureKind::Hill;
    place(f);
    f.radius = rng.uniform(8.0, 20.0);
    f.height = rng.uniform(1.0, 3.0);
    out.push_back(f);
  }
  for (std::size_t i = 0; i < scene.n_boulders; ++i) {
    Feature f;
    f.kind = FeatureKind::Boulder;
    place(f);
    f.radius = rng.uniform(0.6, 1.6);
    f.height = rng.uniform(0.4, 1.2);
    out.push_back(f);
  }
  for (std::size_t i = 0; i < scene.n_ripple_fields; ++i) {
    Feature f;
    f.kind = FeatureKind::Ripple;
    place(f);
    f.radius = rng.uniform(20.0, 35.0);
    f.height = 0.15;
    f.wavelength = rng.uniform(2.5, 4.0);
    f.direction = rng.uniform(0.0, std::numbers::pi);
    out.push_back(f);
  }
  out.insert(out.end(), scene.features.begin(), scene.features.end());
  return out;
}

Heightfield build_heightfield(const SceneConfig& scene, std::uint64_t seed) {
  const Heightfield base = generate_heightfield(scene.region, scene.cell_size, scene.spectrum, derive_seed({seed, 1}));
  const auto features = random_features(scene, seed);
  if (features.empty()) return base;
  return add_features(base, features, derive_seed({seed, 2}));
}

std::vector<SurveyLine> plan_survey(const SurveyConfig& survey, const Region& region, const Heightfield& hf) {
  LawnmowerPlan plan;
  plan.line_spacing = survey.line_spacing;
  plan.sensor_depth = survey.sensor_depth;
  plan.speed = survey.speed;
  plan.ping_rate = survey.ping_rate;

  plan.orientation = LineOrientation::EastWest;
  plan.region = {region.x0 + survey.end_inset, region.y0 + survey.inset, region.width - 2.0 * survey.end_inset,
                 region.height - 2.0 * survey.inset};
  plan.first_line_id = 0;
  auto lines = plan_lawnmower(plan, hf);
  if (survey.cross_lines) {
    plan.orientation = LineOrientation::NorthSouth;
    plan.region = {region.x0 + survey.inset, region.y0 + survey.end_inset, region.width - 2.0 * survey.inset,
                   region.height - 2.0 * survey.end_inset};
    plan.first_line_id = static_cast<int>(lines.size());
    auto ns = plan_lawnmower(plan, hf);
    lines.insert(lines.end(), std::make_move_iterator(ns.begin()), std::make_move_iterator(ns.end()));
  }
  return lines;
}

PoseTable Survey::pose_table() const {
  PoseTable t;
  for (const auto& l : lines) t[l.line_id] = l.poses;
  return t;
}

Survey run_survey(const Heightfield& hf, std::vector<SurveyLine> lines, const SonarParams& sonar, const SimConfig& sim,
                  std::uint64_t seed) {
  Survey s;
  s.lines = std::move(lines);
  for (const auto& l : s.lines) {
    s.sims.push_back(simulate_line(hf, l, sonar, seed, sim));
    s.tracks.push_back(make_track(l, s.sims.back().altimeter));
  }
  return s;
}

std::vector<int> sparse_contributors(std::span<const SurveyLine> lines, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ParameterError("sparse fraction must be in [0, 1]");
  std::vector<int> ids;
  for (const auto& l : lines) ids.push_back(l.line_id);
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed({seed, 0x5a45ULL}));
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
  const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ids.size()) - 1e-9));
  ids.resize(std::min(n, ids.size()));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<WaterfallSet> build_sets(const Heightfield& hf, const Survey& survey, std::span<const int> contributors,
                                     const SimConfig& sim, double slab_half_width) {
  std::vector<AltimeterTrack> tracks;
  for (const auto& t : survey.tracks) {
    if (std::find(contributors.begin(), contributors.end(), t.line_id) != contributors.end()) tracks.push_back(t);
  }
  std::vector<WaterfallSet> sets;
  for (const auto& s : survey.sims) {
    for (Side side : {Side::Port, Side::Starboard}) {
      sets.push_back(build_waterfall_set(hf, s.side(side), tracks, sim, slab_half_width));
    }
  }
  return sets;
}

namespace {

bool contains(std::span<const int> ids, int id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); }

void append_windows(std::vector<WindowSample>& out, const WaterfallSet& set, const WindowConfig& cfg) {
  auto w = make_windows(set, cfg);
  out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
}

}  // namespace

std::vector<WindowSample> make_eval_windows(std::span<const WaterfallSet> sets, std::span<const int> line_ids,
                                            const DatasetConfig& cfg, double overlap) {
  WindowConfig wc = cfg.window;
  wc.augment_flip = false;
  wc.overlap = overlap;
  std::vector<WindowSample> out;
  for (const auto& s : sets) {
    if (contains(line_ids, s.line_id())) append_windows(out, s, wc);
  }
  return out;
}

WindowSplit make_split_windows(std::span<const WaterfallSet> sets, const LineSplit& split, const DatasetConfig& cfg) {
  WindowSplit w;
  for (const auto& s : sets) {
    if (contains(split.train, s.line_id())) append_windows(w.train, s, cfg.window);
  }
  w.val = make_eval_windows(sets, split.val, cfg, cfg.window.overlap);
  w.test = make_eval_windows(sets, split.test, cfg, cfg.test_overlap);
  return w;
}

TrainedEnsemble train_ensemble(const WindowSplit& windows, const ExperimentConfig& cfg,
                               const std::optional<std::filesystem::path>& checkpoint_dir) {
  TrainedEnsemble e;
  e.result = train(windows.train, windows.val, cfg.model, cfg.optim, derive_seed({cfg.seed, 6}), checkpoint_dir);
  e.selected = select_best(e.result.checkpoints, cfg.ensemble_k);
  e.members = materialize(e.result, e.selected);
  return e;
}

SceneData build_scene(const ExperimentConfig& cfg) {
  cfg.validate();
  SceneData s;
  s.hf = build_heightfield(cfg.scene, cfg.seed);
  auto lines = plan_survey(cfg.survey, cfg.scene.region, s.hf);
  s.survey = run_survey(s.hf, std::move(lines), cfg.sonar, cfg.sim, derive_seed({cfg.seed, 3}));
  s.split = split_lines(s.survey.lines, derive_seed({cfg.seed, 4}), cfg.dataset.n_val, cfg.dataset.n_test);
  return s;
}

nlohmann::json RunResult::summary() const {
  std::vector<std::size_t> epochs;
  for (std::size_t i : ensemble.selected) epochs.push_back(ensemble.result.checkpoints[i].epoch);
  return {{"sparse_fraction", sparse_fraction},
          {"contributors", contributors},
          {"selected_epochs", epochs},
          {"metrics", ensemble.result.metrics_json()},
          {"test_windows", test_windows.size()},
          {"points", points.points.size()},
          {"dropped", points.dropped},
          {"points_after_filter", filtered.size()},
          {"grid", comparison.to_json()},
          {"calibration", calibration.to_json()}};
}

RunResult run_experiment(const SceneData& scene, const ExperimentConfig& cfg, double sparse_fraction) {
  RunResult r;
  r.sparse_fraction = sparse_fraction;
  r.contributors = sparse_contributors(scene.survey.lines, sparse_fraction, derive_seed({cfg.seed, 5}));
  spdlog::info("sparse fraction {}: {} contributing lines", sparse_fraction, r.contributors.size());
  const auto sets = build_sets(scene.hf, scene.survey, r.contributors, cfg.sim, cfg.dataset.slab_half_width);
  WindowSplit windows = make_split_windows(sets, scene.split, cfg.dataset);
  spdlog::info("windows: {} train, {} val, {} test", windows.train.size(), windows.val.size(), windows.test.size());
  r.ensemble = train_ensemble(windows, cfg);
  r.test_windows = std::move(windows.test);
  r.test_predictions = ensemble_predict(r.ensemble.members, r.test_windows, cfg.optim.batch_size);
  r.points = predictions_to_points(r.test_windows, r.test_predictions, scene.survey.pose_table());
  r.filtered = filter_outliers(r.points.points, cfg.fusion.outlier);
  r.grid = fuse(r.filtered, grid_for(scene.hf.spec(), cfg.fusion.cell_size), {cfg.fusion.threads});
  r.comparison = grid_mae(r.grid, scene.hf);
  r.calibration = calibration_report(r.test_predictions, r.test_windows);
  spdlog::info("sparse fraction {}: grid mae {:.4f} m, coverage {:.3f}", sparse_fraction, r.comparison.mae,
               r.comparison.coverage);
  return r;
}

nlohmann::json SparseAblation::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"label", r.label},
                         {"fraction", r.fraction},
                         {"mae", r.mae},
                         {"coverage", r.coverage},
                         {"n_points", r.n_points},
                         {"best_val_nll", r.best_val_nll}});
  }
  return {{"rows", rows_json}};
}

std::string SparseAblation::table() const {
  std::ostringstream os;
  os << "sparse depth   mae (m)   coverage   points\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-12s %9.4f %10.3f %8zu\n", r.label.c_str(), r.mae, r.coverage, r.n_points);
    os << buf;
  }
  return os.str();
}

SparseAblation sparse_quantity_ablation(const SceneData& scene, const ExperimentConfig& cfg,
                                        std::vector<double> fractions) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ParameterError("ablation fractions must lie in (0, 1]");
  }
  std::sort(fractions.begin(), fractions.end(), std::greater<>());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
  fractions.push_back(0.0);

  SparseAblation out;
  for (double f : fractions) {
    RunResult run = run_experiment(scene, cfg, f);
    AblationRow row;
    row.fraction = f;
    if (f == 0.0) {
      row.label = "none";
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g%%", f * 100.0);
      row.label = buf;
    }
    row.mae = run.comparison.mae;
    row.coverage = run.comparison.coverage;
    row.n_points = run.filtered.size();
    row.best_val_nll = run.ensemble.result.checkpoints[run.ensemble.selected.front()].val_nll;
    out.rows.push_back(row);
    if (f == 1.0) out.full = std::move(run);
  }
  return out;
}

}  // namespace sssbathy
