#include <gtest/gtest.h>

#include <algorithm>

#include "sssbathy/error.hpp"
#include "sssbathy/pipeline.hpp"

using namespace sssbathy;

namespace {

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.scene.region = {0.0, 0.0, 60.0, 60.0};
  c.scene.n_hills = 2;
  c.scene.n_boulders = 4;
  c.scene.n_ripple_fields = 0;
  c.survey.line_spacing = 20.0;
  c.survey.inset = 10.0;
  c.sonar.n_bins = 128;
  c.sonar.max_range = 30.0;
  c.dataset.window.height = 16;
  c.dataset.window.width = 32;
  c.model.base_channels = 4;
  c.model.n_res_blocks = 1;
  c.optim.epochs = 2;
  c.ensemble_k = 2;
  return c;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = tiny_experiment();
  c.seed = 99;
  c.scene.features.push_back({FeatureKind::Boulder, 10.0, 12.0, 1.5, 0.8, 0.0, 0.0});
  c.fusion.outlier = OutlierFilter::absolute(3.0);
  c.ablation_fractions = {1.0, 0.25};
  const auto j = config_to_json(c);
  const auto back = config_from_json(j);
  EXPECT_EQ(config_to_json(back), j);
  EXPECT_EQ(back.seed, 99u);
  ASSERT_EQ(back.scene.features.size(), 1u);
  EXPECT_EQ(back.scene.features[0].kind, FeatureKind::Boulder);
  EXPECT_EQ(back.dataset.window.width, 32u);
}

TEST(Config, MissingKeysKeepDefaults) {
  const auto c = config_from_json(nlohmann::json{{"seed", 3}, {"optim", {{"epochs", 4}}}});
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.optim.epochs, 4u);
  EXPECT_EQ(c.optim.batch_size, OptimConfig{}.batch_size);
  EXPECT_EQ(c.scene.cell_size, 0.5);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"schema_version", 99}}), ParameterError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ParameterError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"seed", "seven"}}), ParameterError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"survey", 3}}), ParameterError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"ensemble_k", 20}}), ParameterError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"sparse_fraction", 1.5}}), ParameterError);
}

TEST(Config, DottedOverrides) {
  auto j = config_to_json(ExperimentConfig{});
  apply_override(j, "optim.epochs", "3");
  apply_override(j, "fusion.outlier.kind", "none");
  apply_override(j, "dataset.window.augment_flip", "false");
  apply_override(j, "extra.note", "hello world");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.optim.epochs, 3u);
  EXPECT_EQ(c.fusion.outlier.kind, OutlierFilter::Kind::None);
  EXPECT_FALSE(c.dataset.window.augment_flip);
  EXPECT_EQ(j["extra"]["note"], "hello world");
  EXPECT_THROW(apply_override(j, "", "1"), ParameterError);
  EXPECT_THROW(apply_override(j, "optim..epochs", "1"), ParameterError);
  EXPECT_THROW(apply_override(j, "seed.value", "1"), ParameterError);
}

TEST(Survey, EastWestThenNorthSouth) {
  const auto c = tiny_experiment();
  const auto hf = build_heightfield(c.scene, c.seed);
  const auto lines = plan_survey(c.survey, c.scene.region, hf);
  ASSERT_EQ(lines.size(), 6u);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    EXPECT_EQ(lines[i].line_id, static_cast<int>(i));
    EXPECT_EQ(lines[i].orientation, i < 3 ? LineOrientation::EastWest : LineOrientation::NorthSouth);
  }
  EXPECT_DOUBLE_EQ(lines[0].poses[0].position.y(), 10.0);
  EXPECT_DOUBLE_EQ(lines[0].poses[0].position.x(), 2.0);
  EXPECT_DOUBLE_EQ(lines[3].poses[0].position.x(), 10.0);
}

TEST(Scene, HeightfieldDeterministic) {
  const auto c = tiny_experiment();
  EXPECT_EQ(build_heightfield(c.scene, 5).values(), build_heightfield(c.scene, 5).values());
  EXPECT_NE(build_heightfield(c.scene, 5).values(), build_heightfield(c.scene, 6).values());
  const auto f = random_features(c.scene, 5);
  EXPECT_EQ(f.size(), 6u);
  for (const auto& x : f) {
    EXPECT_GE(x.cx, 0.0);
    EXPECT_LE(x.cx, 60.0);
  }
}

TEST(Sparse, ContributorsAreNested) {
  std::vector<SurveyLine> lines(10);
  for (int i = 0; i < 10; ++i) lines[i].line_id = i;
  const auto all = sparse_contributors(lines, 1.0, 3);
  const auto half = sparse_contributors(lines, 0.5, 3);
  const auto third = sparse_contributors(lines, 0.3, 3);
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(half.size(), 5u);
  EXPECT_EQ(third.size(), 3u);
  EXPECT_TRUE(sparse_contributors(lines, 0.0, 3).empty());
  EXPECT_EQ(sparse_contributors(lines, 0.05, 3).size(), 1u);
  for (int id : third) EXPECT_NE(std::find(half.begin(), half.end(), id), half.end());
  EXPECT_EQ(half, sparse_contributors(lines, 0.5, 3));
  EXPECT_THROW(sparse_contributors(lines, 1.1, 3), ParameterError);
}

TEST(Ablation, RejectsFractionsOutsideRange) {
  const SceneData empty;
  const auto c = tiny_experiment();
  EXPECT_THROW(sparse_quantity_ablation(empty, c, {1.0, 0.0}), ParameterError);
  EXPECT_THROW(sparse_quantity_ablation(empty, c, {1.5}), ParameterError);
}

TEST(EndToEnd, TinyExperiment) {
  const auto c = tiny_experiment();
  const auto scene = build_scene(c);
  ASSERT_EQ(scene.survey.lines.size(), 6u);
  EXPECT_EQ(scene.split.val.size(), 1u);
  EXPECT_EQ(scene.split.test.size(), 1u);
  EXPECT_LT(scene.split.val[0], 3);
  EXPECT_GE(scene.split.test[0], 3);

  const auto r = run_experiment(scene, c, 1.0);
  EXPECT_EQ(r.contributors.size(), 6u);
  EXPECT_EQ(r.ensemble.members.size(), 2u);
  EXPECT_EQ(r.ensemble.result.metrics.size(), 2u);
  EXPECT_GT(r.test_windows.size(), 0u);
  for (const auto& w : r.test_windows) {
    EXPECT_EQ(w.provenance.line_id, scene.split.test[0]);
    EXPECT_FALSE(w.provenance.flipped);
  }
  EXPECT_GT(r.points.points.size(), 0u);
  EXPECT_LE(r.filtered.size(), r.points.points.size());
  EXPECT_GT(r.comparison.n_cells, 0u);
  EXPECT_TRUE(std::isfinite(r.comparison.mae));
  const auto s = r.summary();
  EXPECT_EQ(s["points"], r.points.points.size());
  EXPECT_EQ(s["selected_epochs"].size(), 2u);

  const auto again = run_experiment(scene, c, 1.0);
  EXPECT_EQ(again.grid.depth.values(), r.grid.depth.values());
}
