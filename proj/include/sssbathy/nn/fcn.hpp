#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssbathy/array2d.hpp"
#include "sssbathy/nn/ops.hpp"
#include "sssbathy/rng.hpp"

namespace sssbathy::nn {

struct FcnConfig {
  std::size_t in_channels = 2;
  std::size_t base_channels = 16;
  std::size_t n_res_blocks = 3;
  std::size_t first_kernel = 7;
  std::size_t down_kernel = 3;
  std::size_t res_kernel = 3;
  std::size_t up_kernel = 3;
  std::size_t head_kernel = 7;
  std::vector<std::size_t> down_strides{1, 2, 2};
  double norm_eps = 1e-5;
  double var_floor = 1e-6;

  void validate() const;
  nlohmann::json to_json() const;
  static FcnConfig from_json(const nlohmann::json& j);
};

struct NamedParam {
  std::string name;
  Var var;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng);
  Var operator()(const Var& x) const { return conv2d(x, weight, bias, geometry); }

  Var weight, bias;
  ConvGeometry geometry;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad,
                  std::size_t output_pad, Rng& rng);
  Var operator()(const Var& x) const { return conv_transpose2d(x, weight, bias, geometry); }

  Var weight, bias;
  ConvGeometry geometry;
};

/// conv-IN-ReLU-conv-IN, summed with the input. No activation after the sum,
/// so a block whose inner weights and biases are all zero is the identity.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(std::size_t channels, std::size_t kernel, double eps, Rng& rng);
  Var operator()(const Var& x) const;

  Conv2d conv1, conv2;
  double eps = 1e-5;
};

struct Prediction {
  Array2D<double> mu;   ///< relative depth, m
  Array2D<double> var;  ///< Laplace spread, > 0
};

/// Fully convolutional depth + uncertainty regressor.
///
///   input (N, 2, H, W)
///   -> [conv-IN-ReLU] x len(down_strides)        channels base * 2^i
///   -> ResidualBlock x n_res_blocks
///   -> [transposed conv-IN-ReLU] per stride-2 stage
///   -> conv head with 2 channels: mean, softplus(.) + var_floor
///
/// Weights start uniform in +-1/sqrt(fan_in), as do biases.
class FcnModel {
 public:
  FcnModel() = default;
  FcnModel(FcnConfig config, std::uint64_t seed);
  // Parameters are shared handles; copying would alias them. Use clone().
  FcnModel(const FcnModel&) = delete;
  FcnModel& operator=(const FcnModel&) = delete;
  FcnModel(FcnModel&&) = default;
  FcnModel& operator=(FcnModel&&) = default;

  /// Independent model with the same config and parameter values.
  FcnModel clone() const;

  struct Output {
    Var mu;   ///< (N, 1, H, W)
    Var var;  ///< (N, 1, H, W)
  };

  Output forward(const Var& input) const;
  /// Graph-free forward over a batch; one Prediction per sample.
  std::vector<Prediction> predict(const Tensor& input) const;

  const FcnConfig& config() const { return config_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  /// Snapshot / restore of all parameter values in parameters() order.
  std::vector<Tensor> state() const;
  void load_state(const std::vector<Tensor>& state);

  /// Head bias for the mean channel, used to start predictions near the data mean.
  void set_mean_bias(double value);
  /// Zeroes the head weights and biases (both channels).
  void zero_head();

 private:
  void register_params();

  FcnConfig config_;
  std::vector<Conv2d> down_;
  std::vector<ResidualBlock> res_;
  std::vector<ConvTranspose2d> up_;
  Conv2d head_;
  std::vector<NamedParam> params_;
};

}  // namespace sssbathy::nn
