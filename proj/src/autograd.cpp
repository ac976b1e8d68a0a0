#include "logonet/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "logonet/error.hpp"

namespace logonet {

template <typename T>
Tape<T>::Tape(const Tensor<T>& root) : root_(root) {
  // Iterative post-order DFS; deep models would overflow a recursive walk.
  std::unordered_set<const void*> visited;
  std::vector<std::pair<Tensor<T>, std::size_t>> stack;
  if (root.producer()) {
    stack.emplace_back(root, 0);
    visited.insert(root.identity());
  }
  while (!stack.empty()) {
    auto& [tensor, next] = stack.back();
    const auto& inputs = tensor.producer()->inputs;
    if (next < inputs.size()) {
      const Tensor<T>& in = inputs[next++];
      if (in.producer() && visited.insert(in.identity()).second) stack.emplace_back(in, 0);
      continue;
    }
    order_.push_back(tensor);
    stack.pop_back();
  }
}

template <typename T>
void Tape<T>::backward() {
  if (root_.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(root_.shape()));
  }
  for (const auto& t : order_) {
    t.mutable_grad();
    t.zero_grad();
  }
  if (!root_.tracks_grad()) return;
  root_.mutable_grad()[0] += T(1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const auto& node = it->producer();
    node->backward(it->data(), it->grad());
  }
}

template class Tape<float>;
template class Tape<double>;

double check_gradients(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                       const Tensor<double>& x, double h) {
  Tensor<double> probe = x.clone();
  probe.set_requires_grad(true);
  Tensor<double> y = f(probe);
  if (y.numel() != 1) throw ShapeError("check_gradients needs a scalar-valued function");
  backward(y);
  std::vector<double> analytic(probe.numel(), 0.0);
  if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());

  NoGradGuard no_grad;
  double worst = 0.0;
  auto values = probe.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double plus = f(probe).item();
    values[i] = saved - h;
    const double minus = f(probe).item();
    values[i] = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

}  // namespace logonet
