#include "sssbathy/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sssbathy/error.hpp"
#include "sssbathy/manifest.hpp"
#include "sssbathy/nn/checkpoint.hpp"
#include "sssbathy/pipeline.hpp"
#include "sssbathy/plot.hpp"

#ifndef SSSBATHY_VERSION
#define SSSBATHY_VERSION "0.0.0"
#endif

namespace sssbathy {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
  std::string log_level = "info";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Experiment config (JSON)");
  sub->add_option("--seed", c.seed, "Master seed (overrides the config)");
  sub->add_option("--out", c.out, "Output directory (default $SSSBATHY_OUT/<command>)");
  sub->add_option("--set", c.sets, "Config override key=value (dotted path), repeatable");
  sub->add_option("--log-level", c.log_level, "trace|debug|info|warn|error|off");
}

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParameterError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(1) << '\n';
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

struct Run {
  ExperimentConfig cfg;
  fs::path out;
  Manifest manifest;
};

Run start(const std::string& command, const Common& c, const std::vector<std::string>& argv) {
  spdlog::set_level(spdlog::level::from_str(c.log_level));
  Run r;
  json j = config_to_json(ExperimentConfig{});
  if (!c.config.empty()) {
    j = read_json_file(c.config);
    r.manifest.add_input(c.config);
  }
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParameterError("--set expects key=value, got '" + kv + "'");
    apply_override(j, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) j["seed"] = *c.seed;
  r.cfg = config_from_json(j);

  if (!c.out.empty()) {
    r.out = c.out;
  } else {
    const char* env = std::getenv("SSSBATHY_OUT");
    r.out = fs::path(env && *env ? env : "sssbathy_out") / command;
  }
  fs::create_directories(r.out);

  r.manifest.tool_version = SSSBATHY_VERSION;
  r.manifest.command = command;
  r.manifest.argv = argv;
  r.manifest.seed = r.cfg.seed;
  r.manifest.config = config_to_json(r.cfg);
  return r;
}

void finish(Run& r) {
  r.manifest.add_outputs(r.out);
  write_manifest(r.out, r.manifest);
  spdlog::info("wrote {}", (r.out / kManifestName).string());
}

void consume_directory(Run& r, const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("missing input directory " + dir.string());
  const auto hashes = verify_directory(dir);
  r.manifest.inputs.insert(hashes.begin(), hashes.end());
}

// --- survey files --------------------------------------------------------------

std::string line_stem(int id, Side side) { return "line" + std::to_string(id) + "_" + std::string(to_string(side)); }

void save_survey(const fs::path& dir, const Survey& s) {
  json lines = json::array();
  for (std::size_t i = 0; i < s.lines.size(); ++i) {
    const auto& l = s.lines[i];
    write_waterfall(dir / line_stem(l.line_id, Side::Port), s.sims[i].port);
    write_waterfall(dir / line_stem(l.line_id, Side::Starboard), s.sims[i].starboard);
    lines.push_back({{"line_id", l.line_id},
                     {"orientation", l.orientation == LineOrientation::EastWest ? "east-west" : "north-south"},
                     {"speed", l.speed},
                     {"ping_rate", l.ping_rate},
                     {"altimeter", s.sims[i].altimeter}});
  }
  write_json_file(dir / "survey.json", {{"lines", lines}});
}

Survey load_survey(const fs::path& dir) {
  const json j = read_json_file(dir / "survey.json");
  Survey s;
  try {
    for (const auto& e : j.at("lines")) {
      SurveyLine l;
      l.line_id = e.at("line_id").get<int>();
      l.orientation = e.at("orientation").get<std::string>() == "east-west" ? LineOrientation::EastWest
                                                                            : LineOrientation::NorthSouth;
      l.speed = e.at("speed").get<double>();
      l.ping_rate = e.at("ping_rate").get<double>();
      LineSimulation sim;
      sim.port = read_waterfall(dir / line_stem(l.line_id, Side::Port));
      sim.starboard = read_waterfall(dir / line_stem(l.line_id, Side::Starboard));
      sim.altimeter = e.at("altimeter").get<std::vector<double>>();
      l.poses = sim.port.poses;
      s.tracks.push_back(make_track(l, sim.altimeter));
      s.lines.push_back(std::move(l));
      s.sims.push_back(std::move(sim));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed survey.json in " + dir.string() + ": " + e.what());
  }
  return s;
}

// --- dataset files -------------------------------------------------------------

struct DatasetFiles {
  std::vector<WaterfallSet> sets;
  LineSplit split;
  json meta;
};

DatasetFiles load_dataset(const fs::path& dir) {
  DatasetFiles d;
  d.meta = read_json_file(dir / "dataset.json");
  try {
    d.split = split_from_json(d.meta.at("split"));
    for (const auto& e : d.meta.at("sets")) {
      d.sets.push_back(read_waterfall_set(dir, e.at("line_id").get<int>(), side_from_string(e.at("side").get<std::string>())));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed dataset.json in " + dir.string() + ": " + e.what());
  }
  return d;
}

PoseTable poses_of(std::span<const WaterfallSet> sets) {
  PoseTable t;
  for (const auto& s : sets) t.emplace(s.line_id(), s.intensity.poses);
  return t;
}

std::vector<nn::FcnModel> load_ensemble(const fs::path& dir) {
  const json j = read_json_file(dir / "training.json");
  std::vector<nn::FcnModel> models;
  for (const auto& stem : j.at("members")) models.push_back(nn::read_checkpoint(dir / stem.get<std::string>()).model);
  if (models.empty()) throw IoError("training.json in " + dir.string() + " lists no members");
  return models;
}

std::vector<int> test_lines(const DatasetFiles& d, const std::string& which) {
  if (which == "test") return d.split.test;
  if (which == "val") return d.split.val;
  if (which == "train") return d.split.train;
  if (which == "all") {
    std::vector<int> ids;
    for (const auto& s : d.sets) ids.push_back(s.line_id());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }
  throw ParameterError("--split must be train, val, test or all");
}

// --- commands ------------------------------------------------------------------

void cmd_scene(Run& r) {
  const Heightfield hf = build_heightfield(r.cfg.scene, r.cfg.seed);
  write_raster(r.out / "heightfield.grid", hf, {{"quantity", "seabed z"}});
  json features = json::array();
  for (const auto& f : random_features(r.cfg.scene, r.cfg.seed)) {
    features.push_back({{"kind", f.kind == FeatureKind::Hill ? "hill" : f.kind == FeatureKind::Boulder ? "boulder" : "ripple"},
                        {"cx", f.cx},
                        {"cy", f.cy},
                        {"radius", f.radius},
                        {"height", f.height}});
  }
  write_json_file(r.out / "features.json", features);
  const auto& v = hf.values().data();
  r.manifest.results = {{"min_z", *std::min_element(v.begin(), v.end())},
                        {"max_z", *std::max_element(v.begin(), v.end())}};
}

Heightfield load_heightfield(Run& r, const fs::path& scene) {
  consume_directory(r, scene);
  return read_raster(scene / "heightfield.grid");
}

void cmd_survey(Run& r, const fs::path& scene) {
  const Heightfield hf = load_heightfield(r, scene);
  auto lines = plan_survey(r.cfg.survey, r.cfg.scene.region, hf);
  const Survey s = run_survey(hf, std::move(lines), r.cfg.sonar, r.cfg.sim, derive_seed({r.cfg.seed, 3}));
  save_survey(r.out, s);
  r.manifest.results = {{"lines", s.lines.size()}, {"pings", s.lines.empty() ? 0 : s.lines[0].poses.size()}};
}

void cmd_dataset(Run& r, const fs::path& scene, const fs::path& survey_dir, std::optional<double> fraction) {
  const Heightfield hf = load_heightfield(r, scene);
  consume_directory(r, survey_dir);
  const Survey s = load_survey(survey_dir);
  const double f = fraction.value_or(r.cfg.sparse_fraction);
  const auto contributors = sparse_contributors(s.lines, f, derive_seed({r.cfg.seed, 5}));
  const auto sets = build_sets(hf, s, contributors, r.cfg.sim, r.cfg.dataset.slab_half_width);
  const auto split = split_lines(s.lines, derive_seed({r.cfg.seed, 4}), r.cfg.dataset.n_val, r.cfg.dataset.n_test);
  json listed = json::array();
  for (const auto& ws : sets) {
    write_waterfall_set(r.out, ws);
    listed.push_back({{"line_id", ws.line_id()}, {"side", to_string(ws.side())}});
  }
  write_json_file(r.out / "dataset.json",
                  {{"sparse_fraction", f}, {"contributors", contributors}, {"split", split_to_json(split)}, {"sets", listed}});
  r.manifest.results = {{"sets", sets.size()}, {"contributors", contributors}, {"split", split_to_json(split)}};
}

void cmd_train(Run& r, const fs::path& dataset) {
  consume_directory(r, dataset);
  const auto d = load_dataset(dataset);
  const auto windows = make_split_windows(d.sets, d.split, r.cfg.dataset);
  spdlog::info("windows: {} train, {} val", windows.train.size(), windows.val.size());
  const auto e = train_ensemble(windows, r.cfg, r.out / "checkpoints");
  json members = json::array();
  std::vector<std::size_t> epochs;
  for (std::size_t i : e.selected) {
    const std::size_t epoch = e.result.checkpoints[i].epoch;
    epochs.push_back(epoch);
    members.push_back("checkpoints/epoch" + std::to_string(epoch));
  }
  const json training = {{"metrics", e.result.metrics_json()}, {"selected_epochs", epochs}, {"members", members}};
  write_json_file(r.out / "training.json", training);
  r.manifest.results = training;
}

void cmd_predict(Run& r, const fs::path& dataset, const fs::path& model, const std::string& which) {
  consume_directory(r, dataset);
  consume_directory(r, model);
  const auto d = load_dataset(dataset);
  const auto models = load_ensemble(model);
  const auto ids = test_lines(d, which);
  const auto windows = make_eval_windows(d.sets, ids, r.cfg.dataset, r.cfg.dataset.test_overlap);
  if (windows.empty()) throw ParameterError("no windows on the requested lines");
  const auto preds = ensemble_predict(models, windows, r.cfg.optim.batch_size);
  const auto conv = predictions_to_points(windows, preds, poses_of(d.sets));
  write_points(r.out / "points.pts", conv.points);
  const auto cal = calibration_report(preds, windows);
  write_json_file(r.out / "calibration.json", cal.to_json());
  r.manifest.results = {{"lines", ids},
                        {"windows", windows.size()},
                        {"points", conv.points.size()},
                        {"dropped", conv.dropped},
                        {"calibration", cal.to_json()}};
}

GridSpec points_extent(std::span<const PointEstimate> pts, double cell) {
  if (pts.empty()) throw ParameterError("no points to fuse");
  double x0 = pts[0].point.x(), x1 = x0, y0 = pts[0].point.y(), y1 = y0;
  for (const auto& p : pts) {
    x0 = std::min(x0, p.point.x());
    x1 = std::max(x1, p.point.x());
    y0 = std::min(y0, p.point.y());
    y1 = std::max(y1, p.point.y());
  }
  GridSpec g;
  g.cell_size = cell;
  g.x0 = std::floor(x0 / cell) * cell;
  g.y0 = std::floor(y0 / cell) * cell;
  g.n_cols = static_cast<std::size_t>(std::floor((x1 - g.x0) / cell)) + 1;
  g.n_rows = static_cast<std::size_t>(std::floor((y1 - g.y0) / cell)) + 1;
  return g;
}

void cmd_fuse(Run& r, const fs::path& points_file, const std::string& scene, bool unweighted) {
  verify_declared(points_file.parent_path().empty() ? fs::path(".") : points_file.parent_path(), points_file.filename());
  r.manifest.add_input(points_file);
  const auto pts = read_points(points_file);
  const auto kept = filter_outliers(pts, r.cfg.fusion.outlier);
  GridSpec spec;
  if (!scene.empty()) {
    spec = grid_for(load_heightfield(r, scene).spec(), r.cfg.fusion.cell_size);
  } else {
    spec = points_extent(kept, r.cfg.fusion.cell_size);
  }
  const FuseOptions opt{r.cfg.fusion.threads};
  const BathyGrid g = unweighted ? fuse_unweighted(kept, spec, opt) : fuse(kept, spec, opt);
  write_bathy_grid(r.out / "bathy", g);
  r.manifest.results = {{"points", pts.size()},
                        {"points_after_filter", kept.size()},
                        {"cells", g.depth.count_valid()},
                        {"weighted", !unweighted}};
}

json comparison_report(const BathyGrid& g, const Heightfield& hf) { return grid_mae(g, hf).to_json(); }

void write_ablation(const fs::path& out, const SparseAblation& a) {
  write_json_file(out / "ablation.json", a.to_json());
  write_text_file(out / "table.txt", a.table());
}

bool ordering_holds(const SparseAblation& a) {
  // Rows are in descending fraction with "none" last.
  for (std::size_t i = 1; i + 1 < a.rows.size(); ++i) {
    if (!(a.rows[i - 1].mae < a.rows[i].mae)) return false;
  }
  return a.rows.size() < 2 || a.rows.back().mae > a.rows.front().mae;
}

void cmd_eval_grid(Run& r, const fs::path& grid_prefix, const fs::path& scene) {
  const Heightfield hf = load_heightfield(r, scene);
  for (const char* q : {".depth.grid", ".confidence.grid", ".count.grid"}) {
    const fs::path f = grid_prefix.string() + q;
    verify_declared(f.parent_path().empty() ? fs::path(".") : f.parent_path(), f.filename());
    r.manifest.add_input(f);
  }
  const BathyGrid g = read_bathy_grid(grid_prefix);
  const json report = comparison_report(g, hf);
  write_raster(r.out / "error.grid", error_map(g.depth, hf), {{"quantity", "absolute error"}});
  write_json_file(r.out / "report.json", report);
  r.manifest.results = report;
}

void cmd_eval_full(Run& r) {
  const SceneData scene = build_scene(r.cfg);
  const SparseAblation ab = sparse_quantity_ablation(scene, r.cfg, r.cfg.ablation_fractions);
  write_ablation(r.out, ab);
  json report = {{"sparse_ablation", ab.to_json()}, {"ordering_holds", ordering_holds(ab)}};
  std::string text = ab.table();
  text += std::string("ordering 100% < 50% < 30% < none: ") + (ordering_holds(ab) ? "holds" : "violated") + "\n";
  if (ab.full) {
    const RunResult& full = *ab.full;
    const GridSpec spec = grid_for(scene.hf.spec(), r.cfg.fusion.cell_size);
    const auto wa = fusion_weighting_ablation(full.filtered, spec, scene.hf);
    const auto fine = grid_mae(fuse(full.filtered, grid_for(scene.hf.spec(), r.cfg.fusion.cell_size / 2.0)), scene.hf);
    report["weighting"] = wa.to_json();
    report["resolution"] = {{"cell_size", r.cfg.fusion.cell_size},
                            {"mae", full.comparison.mae},
                            {"half_cell_mae", fine.mae}};
    report["calibration"] = full.calibration.to_json();
    write_bathy_grid(r.out / "bathy", full.grid);
    write_raster(r.out / "error.grid", error_map(full.grid.depth, scene.hf));
    write_raster(r.out / "zoom_truth.grid", wa.zoom_truth);
    write_raster(r.out / "zoom_weighted.grid", wa.zoom_weighted);
    write_raster(r.out / "zoom_unweighted.grid", wa.zoom_unweighted);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "fusion: weighted %.4f m, unweighted %.4f m; worst decile %.4f vs %.4f m\n"
                  "resolution: %.3g m cells %.4f m, %.3g m cells %.4f m\n"
                  "calibration band fraction %.3f\n",
                  wa.weighted.mae, wa.unweighted.mae, wa.worst_decile_weighted, wa.worst_decile_unweighted,
                  r.cfg.fusion.cell_size, full.comparison.mae, r.cfg.fusion.cell_size / 2.0, fine.mae,
                  full.calibration.band_fraction);
    text += buf;
  }
  write_json_file(r.out / "report.json", report);
  write_text_file(r.out / "report.txt", text);
  std::cout << text;
  r.manifest.results = report;
}

void cmd_ablate(Run& r, const std::vector<double>& fractions) {
  const SceneData scene = build_scene(r.cfg);
  const auto ab = sparse_quantity_ablation(scene, r.cfg, fractions.empty() ? r.cfg.ablation_fractions : fractions);
  write_ablation(r.out, ab);
  std::cout << ab.table();
  r.manifest.results = ab.to_json();
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  static const bool logger_ready = [] {
    spdlog::set_default_logger(spdlog::stderr_color_mt("sssbathy"));
    return true;
  }();
  (void)logger_ready;

  CLI::App app{"Sidescan sonar bathymetry: simulation, training, fusion and evaluation", "sssbathy"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SSSBATHY_VERSION);

  Common common;
  std::string scene_dir, survey_dir, dataset_dir, model_dir, points_file, grid_prefix, input, plot_out, mode = "gray";
  std::string split = "test";
  std::optional<double> fraction;
  std::vector<double> fractions;
  bool unweighted = false;

  auto* scene = app.add_subcommand("scene", "Generate the synthetic heightfield");
  add_common(scene, common);

  auto* survey = app.add_subcommand("survey", "Plan the lawnmower survey and simulate the waterfalls");
  add_common(survey, common);
  survey->add_option("--scene", scene_dir, "Output directory of `scene`")->required();

  auto* dataset = app.add_subcommand("dataset", "Drape ground truth, associate sparse depth, split lines");
  add_common(dataset, common);
  dataset->add_option("--scene", scene_dir, "Output directory of `scene`")->required();
  dataset->add_option("--survey", survey_dir, "Output directory of `survey`")->required();
  dataset->add_option("--fraction", fraction, "Fraction of lines contributing sparse depth");

  auto* train_cmd = app.add_subcommand("train", "Train the network and keep the best checkpoints");
  add_common(train_cmd, common);
  train_cmd->add_option("--dataset", dataset_dir, "Output directory of `dataset`")->required();

  auto* predict = app.add_subcommand("predict", "Run the ensemble and convert predictions to points");
  add_common(predict, common);
  predict->add_option("--dataset", dataset_dir, "Output directory of `dataset`")->required();
  predict->add_option("--model", model_dir, "Output directory of `train`")->required();
  predict->add_option("--split", split, "Lines to predict: test, val, train or all");

  auto* fuse_cmd = app.add_subcommand("fuse", "Filter points and fuse them into a bathymetry grid");
  add_common(fuse_cmd, common);
  fuse_cmd->add_option("--points", points_file, "Points file from `predict`")->required();
  fuse_cmd->add_option("--scene", scene_dir, "Scene directory; the grid then covers the heightfield");
  fuse_cmd->add_flag("--unweighted", unweighted, "Plain mean instead of confidence weighting");

  auto* eval = app.add_subcommand("eval", "Compare a grid with the truth, or run the full evaluation");
  add_common(eval, common);
  eval->add_option("--grid", grid_prefix, "Grid prefix from `fuse` (omit for the full evaluation)");
  eval->add_option("--scene", scene_dir, "Scene directory holding the truth heightfield");

  auto* ablate = app.add_subcommand("ablate", "Sparse depth quantity ablation");
  add_common(ablate, common);
  ablate->add_option("--fractions", fractions, "Fractions in (0, 1]; a no-sparse row is always added")->delimiter(',');

  auto* plot = app.add_subcommand("plot", "Render a grid file as PGM/PPM");
  plot->add_option("--input", input, "Grid file")->required();
  plot->add_option("--out", plot_out, "Image file")->required();
  plot->add_option("--mode", mode, "gray, colormap or error")->check(CLI::IsMember({"gray", "colormap", "error"}));
  plot->add_option("--log-level", common.log_level, "trace|debug|info|warn|error|off");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return 0;
    }
    std::cerr << "sssbathy: error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*plot) {
      spdlog::set_level(spdlog::level::from_str(common.log_level));
      const Raster r = read_raster(input);
      const auto sc = plot_raster(r, plot_out, plot_mode_from_string(mode));
      Manifest m;
      m.tool_version = SSSBATHY_VERSION;
      m.command = "plot";
      m.argv = args;
      m.add_input(input);
      m.outputs[fs::path(plot_out).filename().string()] = sha256_file(plot_out);
      m.results = sc.to_json();
      write_json_file(plot_out + ".manifest.json", m.to_json());
      return 0;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    Run r = start(name, common, args);
    if (name == "scene") {
      cmd_scene(r);
    } else if (name == "survey") {
      cmd_survey(r, scene_dir);
    } else if (name == "dataset") {
      cmd_dataset(r, scene_dir, survey_dir, fraction);
    } else if (name == "train") {
      cmd_train(r, dataset_dir);
    } else if (name == "predict") {
      cmd_predict(r, dataset_dir, model_dir, split);
    } else if (name == "fuse") {
      cmd_fuse(r, points_file, scene_dir, unweighted);
    } else if (name == "eval") {
      if (grid_prefix.empty()) {
        cmd_eval_full(r);
      } else {
        if (scene_dir.empty()) throw ParameterError("eval --grid needs --scene");
        cmd_eval_grid(r, grid_prefix, scene_dir);
      }
    } else if (name == "ablate") {
      cmd_ablate(r, fractions);
    }
    finish(r);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "sssbathy: error: " << msg << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sssbathy
