#include "sssbathy/nn/tensor.hpp"

#include <algorithm>

#include "sssbathy/error.hpp"

namespace sssbathy::nn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) throw ParameterError("tensor data does not match shape " + shape_.str());
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw ParameterError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace sssbathy::nn
