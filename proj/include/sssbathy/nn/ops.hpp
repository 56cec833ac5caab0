#pragma once

#include <cstddef>

#include "sssbathy/nn/autograd.hpp"

namespace sssbathy::nn {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t output_pad = 0;  ///< transposed convolution only
};

/// x: (N, Cin, H, W), weight: (Cout, Cin, k, k), bias: (Cout, 1, 1, 1) or null.
Var conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry g);

/// x: (N, Cin, H, W), weight: (Cin, Cout, k, k). Output side (H - 1) * stride - 2 * pad + k + output_pad.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry g);

/// Per (sample, channel) normalization over the spatial dims, no affine term.
Var instance_norm(const Var& x, double eps = 1e-5);

Var relu(const Var& x);
Var add(const Var& a, const Var& b);

/// log(1 + exp(x)) + floor.
Var softplus(const Var& x, double floor = 0.0);

/// Channel `c` of x as an (N, 1, H, W) tensor.
Var select_channel(const Var& x, std::size_t c);

/// Sum over all elements of x * weights (a fixed tensor); used to reduce
/// arbitrary outputs to a scalar in gradient checks.
Var weighted_sum(const Var& x, const Tensor& weights);

/// Mean over pixels with mask != 0 of |target - mu| / var + log var.
/// Shapes (N, 1, H, W). Throws EmptyMaskError when no pixel is valid.
Var laplace_nll(const Var& mu, const Var& var, const Tensor& target, const Tensor& mask);

/// Mean over valid pixels of |target - mu|.
Var masked_mae(const Var& mu, const Tensor& target, const Tensor& mask);

// Plain forward kernels, shared with the tests' reference implementations.
double softplus_value(double x);
double sigmoid_value(double x);

}  // namespace sssbathy::nn
