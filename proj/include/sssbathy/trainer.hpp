#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssbathy/dataset.hpp"
#include "sssbathy/nn/fcn.hpp"

namespace sssbathy {

struct OptimConfig {
  std::size_t epochs = 12;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr_decay = 0.85;  ///< multiplicative per-epoch learning-rate factor
  bool shuffle = true;
  /// Start the mean head at the average training target (otherwise the
  /// initializer's bias is kept).
  bool init_mean_from_data = true;

  void validate() const;
  nlohmann::json to_json() const;
  static OptimConfig from_json(const nlohmann::json& j);
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive-moment gradient descent over a fixed parameter list.
class Adam {
 public:
  Adam(const std::vector<nn::NamedParam>& params, const OptimConfig& config);
  void step();
  void zero_grad();
  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }

 private:
  std::vector<nn::Var> params_;
  std::vector<nn::Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_nll = 0.0;  ///< mean over batches in the epoch
  double first_batch_nll = 0.0;
  double val_nll = 0.0;
  double val_mae = 0.0;
  std::size_t steps = 0;
};

struct ModelCheckpoint {
  std::size_t epoch = 0;
  double val_nll = 0.0;
  double val_mae = 0.0;
  std::vector<nn::Tensor> state;
};

struct TrainResult {
  nn::FcnConfig model_config;
  std::vector<EpochMetrics> metrics;
  std::vector<ModelCheckpoint> checkpoints;

  nlohmann::json metrics_json() const;
};

/// Pooled NLL and MAE over every valid pixel of `windows`.
struct Evaluation {
  double nll = 0.0;
  double mae = 0.0;
  std::size_t pixels = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch training with the masked Laplace NLL. One checkpoint per epoch
/// (kept in memory; also written under `checkpoint_dir` when given).
/// Throws ParameterError on an empty training split and TrainingDiverged on
/// a non-finite loss.
TrainResult train(std::span<const WindowSample> train_set, std::span<const WindowSample> val_set,
                  const nn::FcnConfig& model_config, const OptimConfig& optim, std::uint64_t seed,
                  const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt,
                  const EpochCallback& on_epoch = {});

Evaluation evaluate(const nn::FcnModel& model, std::span<const WindowSample> windows, std::size_t batch_size = 8);

/// Indices of the k checkpoints with the lowest validation NLL, best first;
/// ties go to the earlier epoch.
std::vector<std::size_t> select_best(std::span<const ModelCheckpoint> checkpoints, std::size_t k);

/// Builds independent models from the selected checkpoints.
std::vector<nn::FcnModel> materialize(const TrainResult& result, std::span<const std::size_t> indices);

/// Moment-matched mixture: mu = mean(mu_i), var = mean(var_i) + mean(mu_i^2) - mu^2.
nn::Prediction ensemble_combine(std::span<const nn::Prediction> members);

/// Runs every member on the windows and combines per window.
std::vector<nn::Prediction> ensemble_predict(std::span<const nn::FcnModel> models,
                                             std::span<const WindowSample> windows, std::size_t batch_size = 8);

// Batch assembly: (N, 2, H, W) input of [intensity, sparse], and (N, 1, H, W) target/mask.
nn::Tensor make_input(std::span<const WindowSample* const> windows);
nn::Tensor make_target(std::span<const WindowSample* const> windows);
nn::Tensor make_mask(std::span<const WindowSample* const> windows);

}  // namespace sssbathy
