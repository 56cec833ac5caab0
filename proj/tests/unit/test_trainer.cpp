#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "sssbathy/error.hpp"
#include "sssbathy/nn/checkpoint.hpp"
#include "sssbathy/trainer.hpp"

using namespace sssbathy;
using nn::Prediction;

namespace {

WindowSample synthetic_window(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  WindowSample s;
  s.intensity = Array2D<double>(h, w);
  s.sparse = Array2D<double>(h, w, 0.0);
  s.target = Array2D<double>(h, w);
  s.mask = Array2D<std::uint8_t>(h, w, 1);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double depth = 12.0 + 0.8 * std::sin(0.3 * static_cast<double>(r)) + 0.05 * static_cast<double>(c);
      s.target(r, c) = depth;
      s.intensity(r, c) = std::cos(0.3 * static_cast<double>(r)) + 0.1 * rng.normal();
      if (c < 3) s.mask(r, c) = 0;
    }
    s.sparse(r, w / 2) = s.target(r, w / 2);
  }
  s.params.n_bins = w;
  return s;
}

nn::FcnConfig small_config() {
  nn::FcnConfig c;
  c.base_channels = 4;
  c.n_res_blocks = 1;
  return c;
}

Prediction constant_prediction(double mu, double var) {
  return {Array2D<double>(2, 3, mu), Array2D<double>(2, 3, var)};
}

std::vector<ModelCheckpoint> checkpoints_with(std::vector<double> nlls) {
  std::vector<ModelCheckpoint> out;
  for (std::size_t i = 0; i < nlls.size(); ++i) out.push_back({i, nlls[i], 0.0, {}});
  return out;
}

}  // namespace

TEST(Trainer, OverfitsOneWindow) {
  const WindowSample w = synthetic_window(32, 32, 3);
  const WindowSample* batch[1] = {&w};
  const auto input = make_input(batch);
  const auto target = make_target(batch);
  const auto mask = make_mask(batch);

  nn::FcnModel model(nn::FcnConfig{}, 5);
  model.set_mean_bias(12.0);
  OptimConfig optim;
  Adam adam(model.parameters(), optim);
  for (int step = 0; step < 500; ++step) {
    adam.zero_grad();
    const auto out = model.forward(nn::constant(input));
    nn::backward(nn::laplace_nll(out.mu, out.var, target, mask));
    adam.step();
  }
  const std::vector<WindowSample> set{w};
  EXPECT_LT(evaluate(model, set).mae, 0.05);
}

TEST(Trainer, SameSeedSameFirstEpoch) {
  std::vector<WindowSample> set;
  for (std::uint64_t s = 0; s < 4; ++s) set.push_back(synthetic_window(16, 16, s));
  OptimConfig optim;
  optim.epochs = 1;
  optim.batch_size = 2;
  const auto a = train(set, {}, small_config(), optim, 11);
  const auto b = train(set, {}, small_config(), optim, 11);
  ASSERT_EQ(a.metrics.size(), 1u);
  EXPECT_EQ(a.metrics[0].first_batch_nll, b.metrics[0].first_batch_nll);
  EXPECT_EQ(a.metrics[0].train_nll, b.metrics[0].train_nll);
  EXPECT_EQ(a.checkpoints[0].state[0].values(), b.checkpoints[0].state[0].values());
}

TEST(Trainer, EmptySplitRejected) {
  OptimConfig optim;
  EXPECT_THROW(train({}, {}, small_config(), optim, 1), ParameterError);
  WindowSample w = synthetic_window(16, 16, 1);
  w.mask.data().assign(w.mask.size(), 0);
  const std::vector<WindowSample> masked{w};
  EXPECT_THROW(train(masked, {}, small_config(), optim, 1), ParameterError);
}

TEST(Trainer, CheckpointPerEpochAndLoss) {
  std::vector<WindowSample> set;
  for (std::uint64_t s = 0; s < 4; ++s) set.push_back(synthetic_window(16, 16, s));
  const std::vector<WindowSample> val{synthetic_window(16, 16, 9)};
  OptimConfig optim;
  optim.epochs = 3;
  optim.batch_size = 2;
  const auto dir = std::filesystem::temp_directory_path() / "sssbathy_trainer_ckpt";
  std::filesystem::remove_all(dir);
  std::size_t calls = 0;
  const auto r = train(set, val, small_config(), optim, 2, dir, [&](const EpochMetrics&) { ++calls; });
  EXPECT_EQ(calls, 3u);
  ASSERT_EQ(r.checkpoints.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(r.metrics[e].steps, 2u);
    EXPECT_TRUE(std::isfinite(r.metrics[e].val_nll));
    EXPECT_TRUE(std::filesystem::exists(dir / ("epoch" + std::to_string(e) + ".json")));
  }
  const auto models = materialize(r, std::vector<std::size_t>{2});
  EXPECT_DOUBLE_EQ(evaluate(models[0], val).nll, r.metrics[2].val_nll);
  EXPECT_LT(r.metrics.back().train_nll, r.metrics.front().first_batch_nll);
  std::filesystem::remove_all(dir);
}

TEST(Trainer, NonFiniteLossAborts) {
  WindowSample w = synthetic_window(16, 16, 1);
  w.target(5, 5) = std::nan("");
  const std::vector<WindowSample> set{w};
  OptimConfig optim;
  optim.epochs = 1;
  EXPECT_THROW(train(set, {}, small_config(), optim, 1), TrainingDiverged);
}

TEST(Trainer, OptimConfigValidation) {
  OptimConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = OptimConfig{};
  c.learning_rate = -1.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = OptimConfig{};
  c.epochs = 5;
  c.learning_rate = 3e-4;
  const auto back = OptimConfig::from_json(c.to_json());
  EXPECT_EQ(back.epochs, 5u);
  EXPECT_EQ(back.learning_rate, 3e-4);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  nn::FcnModel model(small_config(), 1);
  OptimConfig optim;
  optim.learning_rate = 0.01;
  Adam adam(model.parameters(), optim);
  const auto before = model.state();
  for (const auto& p : model.parameters()) {
    p.var->grad = nn::Tensor(p.var->value.shape(), 0.5);
  }
  adam.step();
  const auto after = model.state();
  // With bias correction the first update is lr * g / (|g| + eps).
  for (std::size_t i = 0; i < before.size(); ++i) {
    for (std::size_t j = 0; j < before[i].numel(); ++j) {
      EXPECT_NEAR(before[i][j] - after[i][j], 0.01, 1e-9);
    }
  }
}

TEST(SelectBest, ArgminAndTies) {
  const auto ck = checkpoints_with({0.9, 0.4, 0.7, 0.4, 1.2});
  EXPECT_EQ(select_best(ck, 1), (std::vector<std::size_t>{1}));
  EXPECT_EQ(select_best(ck, 3), (std::vector<std::size_t>{1, 3, 2}));
  EXPECT_EQ(select_best(ck, 5).size(), 5u);
  EXPECT_THROW(select_best(ck, 6), ParameterError);
  EXPECT_THROW(select_best(ck, 0), ParameterError);
}

TEST(SelectBest, SelectedNeverWorseThanDiscarded) {
  Rng rng(4);
  std::vector<double> nlls;
  for (int i = 0; i < 20; ++i) nlls.push_back(rng.uniform(0.0, 2.0));
  const auto ck = checkpoints_with(nlls);
  const auto sel = select_best(ck, 3);
  double worst_selected = 0.0;
  for (auto i : sel) worst_selected = std::max(worst_selected, nlls[i]);
  for (std::size_t i = 0; i < nlls.size(); ++i) {
    if (std::find(sel.begin(), sel.end(), i) == sel.end()) {
      EXPECT_LE(worst_selected, nlls[i]);
    }
  }
}

TEST(Ensemble, SingleMemberIsIdentity) {
  Prediction p = constant_prediction(4.0, 0.3);
  p.mu(1, 2) = 5.5;
  const std::vector<Prediction> one{p};
  const auto out = ensemble_combine(one);
  EXPECT_EQ(out.mu, p.mu);
  EXPECT_EQ(out.var, p.var);
}

TEST(Ensemble, MomentMatching) {
  const std::vector<Prediction> two{constant_prediction(10.0 - 0.5, 0.2), constant_prediction(10.0 + 0.5, 0.2)};
  const auto out = ensemble_combine(two);
  EXPECT_DOUBLE_EQ(out.mu(0, 0), 10.0);
  EXPECT_NEAR(out.var(0, 0), 0.2 + 0.25, 1e-12);

  const std::vector<Prediction> same{constant_prediction(7.0, 0.3), constant_prediction(7.0, 0.3),
                                     constant_prediction(7.0, 0.3)};
  const auto s = ensemble_combine(same);
  EXPECT_DOUBLE_EQ(s.mu(1, 1), 7.0);
  EXPECT_DOUBLE_EQ(s.var(1, 1), 0.3);
  EXPECT_THROW(ensemble_combine(std::vector<Prediction>{}), ParameterError);
}

TEST(Ensemble, VarianceAtLeastMeanMemberVariance) {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    std::vector<Prediction> m;
    double mean_var = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double v = rng.uniform(1e-3, 2.0);
      m.push_back(constant_prediction(rng.uniform(0.0, 30.0), v));
      mean_var += v / 3.0;
    }
    EXPECT_GE(ensemble_combine(m).var(0, 0), mean_var * (1.0 - 1e-12));
  }
}

TEST(Ensemble, PredictMatchesManualCombine) {
  const std::vector<WindowSample> ws{synthetic_window(16, 16, 1), synthetic_window(16, 16, 2),
                                     synthetic_window(16, 16, 3)};
  std::vector<nn::FcnModel> models;
  models.emplace_back(small_config(), 1);
  models.emplace_back(small_config(), 2);
  const auto preds = ensemble_predict(models, ws, 2);
  ASSERT_EQ(preds.size(), 3u);
  const WindowSample* b[1] = {&ws[2]};
  const auto in = make_input(b);
  const std::vector<Prediction> members{models[0].predict(in)[0], models[1].predict(in)[0]};
  const auto manual = ensemble_combine(members);
  EXPECT_EQ(preds[2].mu, manual.mu);
  EXPECT_EQ(preds[2].var, manual.var);
}
