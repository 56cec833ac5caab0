#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sssbathy::nn {

/// NCHW shape. Parameters that are not images use the leading dims and set
/// the rest to 1 (a bias of 16 channels is {16, 1, 1, 1}).
struct Shape {
  std::size_t n = 1, c = 1, h = 1, w = 1;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::array<std::size_t, 4> dims() const { return {n, c, h, w}; }
  std::string str() const;
};

/// Contiguous row-major float64 tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  /// View of one sample (all channels).
  std::span<double> sample(std::size_t n) { return {data_.data() + n * stride_n(), stride_n()}; }
  std::span<const double> sample(std::size_t n) const { return {data_.data() + n * stride_n(), stride_n()}; }
  std::size_t stride_n() const { return shape_.c * shape_.h * shape_.w; }

  void fill(double v);

 private:
  Shape shape_{};
  std::vector<double> data_;
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace sssbathy::nn
