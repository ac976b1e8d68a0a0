#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace logonet {

using Shape = std::vector<std::size_t>;

/// Allocator returning 64-byte aligned blocks. Vectorized kernels peel a
/// scalar prefix up to the first aligned element, so the summation order of
/// a reduction depends on where its buffer starts; fixed alignment makes
/// results a function of the shapes alone.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
class Tensor;

/// One recorded operation: the inputs it read and how to push the output
/// gradient back into them. The output owns its producing node, never the
/// other way round, so graphs are released with the last result handle.
template <typename T>
struct Node {
  using BackwardFn =
      std::function<void(std::span<const T> out_data, std::span<const T> out_grad)>;

  std::string_view op;
  std::vector<Tensor<T>> inputs;
  BackwardFn backward;
};

namespace detail {

template <typename T>
struct TensorImpl {
  Shape shape;
  AlignedVector<T> data;
  AlignedVector<T> grad;
  bool requires_grad = false;
  std::shared_ptr<Node<T>> producer;
};

}  // namespace detail

/// Dense row-major array (N, C, H, W for image data) with an optional
/// gradient buffer. A Tensor is a reference-counted handle: copies alias the
/// same storage, which is what lets parameters collect gradients from every
/// place they are used. Use clone() for an independent copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() const { return impl_->data; }
  T item() const;
  T& operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);

  /// True when gradients can reach this tensor: it is a leaf that requires
  /// grad or the result of a recorded operation.
  bool tracks_grad() const { return impl_->requires_grad || impl_->producer != nullptr; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<T> grad() const { return impl_->grad; }
  /// Gradient buffer, allocated as zeros on first use.
  std::span<T> mutable_grad() const;
  void zero_grad() const;
  void clear_grad() const { impl_->grad.clear(); }

  const std::shared_ptr<Node<T>>& producer() const { return impl_->producer; }
  void set_producer(std::shared_ptr<Node<T>> node) const { impl_->producer = std::move(node); }

  /// Independent copy of the values; no gradient, no graph linkage.
  Tensor clone() const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> values(impl_->data.begin(), impl_->data.end());
    Tensor<U> out(impl_->shape, std::move(values));
    out.set_requires_grad(impl_->requires_grad);
    return out;
  }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const void* identity() const { return impl_.get(); }

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

/// Thread-local switch for graph recording. Inference paths run under a
/// NoGradGuard so concurrent callers never build tapes.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace logonet
