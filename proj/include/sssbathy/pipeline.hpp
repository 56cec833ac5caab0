#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssbathy/dataset.hpp"
#include "sssbathy/fusion.hpp"
#include "sssbathy/metrics.hpp"
#include "sssbathy/sonar_sim.hpp"
#include "sssbathy/terrain.hpp"
#include "sssbathy/trainer.hpp"

namespace sssbathy {

inline constexpr int kSchemaVersion = 1;

struct SceneConfig {
  Region region{0.0, 0.0, 200.0, 200.0};
  double cell_size = 0.5;
  SpectrumParams spectrum;
  std::size_t n_hills = 6;
  std::size_t n_boulders = 30;
  std::size_t n_ripple_fields = 2;
  std::vector<Feature> features;  ///< placed in addition to the random ones
};

struct SurveyConfig {
  double line_spacing = 40.0;
  double inset = 20.0;      ///< distance from the region edge to the outermost lines
  double end_inset = 2.0;   ///< distance from the region edge to line start and end
  double sensor_depth = 1.0;
  double speed = 1.0;
  double ping_rate = 2.0;
  bool cross_lines = true;  ///< also run the North-South set
};

struct DatasetConfig {
  WindowConfig window;
  double test_overlap = 0.75;
  std::size_t n_val = 1;
  std::size_t n_test = 1;
  double slab_half_width = 0.0;  ///< 0 selects half the ping spacing
};

struct FusionConfig {
  double cell_size = 0.5;
  OutlierFilter outlier = OutlierFilter::percentile(5.0);
  unsigned threads = 1;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 7;
  SceneConfig scene;
  SurveyConfig survey;
  SonarParams sonar;
  SimConfig sim;
  DatasetConfig dataset;
  nn::FcnConfig model;
  OptimConfig optim;
  std::size_t ensemble_k = 3;
  FusionConfig fusion;
  double sparse_fraction = 1.0;
  std::vector<double> ablation_fractions{1.0, 0.5, 0.3};

  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults. Throws ParameterError on a schema version
/// other than kSchemaVersion or on invalid values.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Sets the key at a dotted path ("optim.epochs") to `value`, parsed as JSON
/// when possible and kept as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& dotted_path, const std::string& value);

// --- stages ----------------------------------------------------------------

Heightfield build_heightfield(const SceneConfig& scene, std::uint64_t seed);

/// Random hills, boulders and ripple fields placed inside the region.
std::vector<Feature> random_features(const SceneConfig& scene, std::uint64_t seed);

/// East-West lines first, then (optionally) North-South lines; ids are consecutive.
std::vector<SurveyLine> plan_survey(const SurveyConfig& survey, const Region& region, const Heightfield& hf);

struct Survey {
  std::vector<SurveyLine> lines;
  std::vector<LineSimulation> sims;
  std::vector<AltimeterTrack> tracks;

  PoseTable pose_table() const;
};

Survey run_survey(const Heightfield& hf, std::vector<SurveyLine> lines, const SonarParams& sonar, const SimConfig& sim,
                  std::uint64_t seed);

/// Lines whose altimeter contributes sparse depth: the first
/// ceil(fraction * n) lines of a seeded permutation, so smaller fractions
/// select subsets of larger ones. Fraction 0 selects none.
std::vector<int> sparse_contributors(std::span<const SurveyLine> lines, double fraction, std::uint64_t seed);

/// Waterfall sets for both sides of every line, with sparse depth from the
/// contributing lines only.
std::vector<WaterfallSet> build_sets(const Heightfield& hf, const Survey& survey, std::span<const int> contributors,
                                     const SimConfig& sim, double slab_half_width);

struct WindowSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> val;
  std::vector<WindowSample> test;
};

/// Training windows use the window config (flip augmentation included);
/// validation windows drop the flips; test windows use test_overlap and no flips.
WindowSplit make_split_windows(std::span<const WaterfallSet> sets, const LineSplit& split, const DatasetConfig& cfg);

/// Test-style windows (no flips) of the given lines.
std::vector<WindowSample> make_eval_windows(std::span<const WaterfallSet> sets, std::span<const int> line_ids,
                                            const DatasetConfig& cfg, double overlap);

struct TrainedEnsemble {
  TrainResult result;
  std::vector<std::size_t> selected;
  std::vector<nn::FcnModel> members;
};

TrainedEnsemble train_ensemble(const WindowSplit& windows, const ExperimentConfig& cfg,
                               const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

// --- end to end --------------------------------------------------------------

/// Everything that does not depend on the sparse fraction.
struct SceneData {
  Heightfield hf;
  Survey survey;
  LineSplit split;
};

SceneData build_scene(const ExperimentConfig& cfg);

struct RunResult {
  double sparse_fraction = 1.0;
  std::vector<int> contributors;
  TrainedEnsemble ensemble;
  std::vector<WindowSample> test_windows;
  std::vector<nn::Prediction> test_predictions;
  PointConversion points;              ///< before outlier filtering
  std::vector<PointEstimate> filtered;
  BathyGrid grid;
  GridComparison comparison;
  CalibrationReport calibration;

  nlohmann::json summary() const;
};

/// Trains on the scene with the given sparse fraction and evaluates the
/// fused test-line grid against the heightfield.
RunResult run_experiment(const SceneData& scene, const ExperimentConfig& cfg, double sparse_fraction);

struct AblationRow {
  std::string label;
  double fraction = 0.0;
  double mae = 0.0;
  double coverage = 0.0;
  std::size_t n_points = 0;
  double best_val_nll = 0.0;
};

struct SparseAblation {
  std::vector<AblationRow> rows;  ///< descending fraction, "none" last
  std::optional<RunResult> full;  ///< the fraction 1.0 run, when present

  nlohmann::json to_json() const;
  std::string table() const;
};

/// Retrains per fraction. Fractions are deduplicated, must lie in (0, 1],
/// and a "none" row is always appended.
SparseAblation sparse_quantity_ablation(const SceneData& scene, const ExperimentConfig& cfg,
                                        std::vector<double> fractions);

}  // namespace sssbathy
