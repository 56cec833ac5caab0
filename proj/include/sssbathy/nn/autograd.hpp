#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sssbathy/nn/tensor.hpp"

namespace sssbathy::nn {

struct Node;
using Var = std::shared_ptr<Node>;

/// One value in a recorded computation. Ops append a closure that pushes the
/// node's gradient into its parents; `backward` runs them in reverse
/// topological order.
struct Node {
  Tensor value;
  Tensor grad;  ///< allocated on first accumulation
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  /// grad += g (allocating zeros first if needed).
  Tensor& grad_buffer();
  bool has_grad() const { return grad.numel() == value.numel() && value.numel() > 0; }
};

/// Leaf that never receives a gradient.
Var constant(Tensor t);
/// Leaf that accumulates gradients (model weights).
Var parameter(Tensor t);

/// True unless a NoGradGuard is alive on this thread.
bool grad_enabled();

/// Disables graph recording for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds the node for an op result. Parents keep their positions (null
/// entries are allowed); when none requires grad, or recording is off, the
/// result is a constant.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn);

/// Reverse-mode sweep from a scalar. Throws UsageError when `loss` is not a
/// scalar or carries no recorded graph.
void backward(const Var& loss);

}  // namespace sssbathy::nn
