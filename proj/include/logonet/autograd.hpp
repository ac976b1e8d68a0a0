#pragma once

#include <functional>
#include <vector>

#include "logonet/tensor.hpp"

namespace logonet {

/// Recorded operations reachable from a root tensor, in topological order
/// (every node's inputs precede it). Building a Tape does not consume the
/// graph, so backward() may run more than once; leaf gradients accumulate
/// across runs while intermediate gradients are recomputed each time.
template <typename T>
class Tape {
 public:
  explicit Tape(const Tensor<T>& root);

  /// Tensors produced by recorded operations, inputs before outputs.
  const std::vector<Tensor<T>>& nodes() const { return order_; }
  std::size_t size() const { return order_.size(); }

  /// Seeds d(root)/d(root) = 1 and propagates. Root must be scalar.
  void backward();

 private:
  Tensor<T> root_;
  std::vector<Tensor<T>> order_;
};

/// Accumulates dLoss/dx into every requires_grad tensor reachable from loss.
template <typename T>
void backward(const Tensor<T>& loss) {
  Tape<T>(loss).backward();
}

/// Largest elementwise |analytic - numeric| / max(1, |analytic|, |numeric|)
/// between the reverse-mode gradient of a scalar function at x and its
/// central difference with step h. Runs in double precision.
double check_gradients(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                       const Tensor<double>& x, double h = 1e-3);

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace logonet
