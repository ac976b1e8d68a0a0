#pragma once

#include <vector>

#include "logonet/tensor.hpp"

namespace logonet {

// Differentiable operations. Each records a node when gradients are enabled
// and at least one input tracks gradients; otherwise it is a plain function.
// All are instantiated for float (training) and double (gradient checking).

/// 2-D cross-correlation with zero padding.
/// input [N,Cin,H,W], weight [Cout,Cin,k,k], bias [Cout] -> [N,Cout,H',W'],
/// H' = (H + 2*padding - k) / stride + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t padding = 0);

/// Window maxima. The gradient goes to the lowest flat index among ties.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t kernel, std::size_t stride);

/// [N,C,H,W] -> [N,C,1,1]
template <typename T>
Tensor<T> global_avgpool(const Tensor<T>& input);
template <typename T>
Tensor<T> global_maxpool(const Tensor<T>& input);

/// Per-position reduction over channels: [N,C,H,W] -> [N,1,H,W]
template <typename T>
Tensor<T> channel_mean(const Tensor<T>& input);
template <typename T>
Tensor<T> channel_max(const Tensor<T>& input);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// Elementwise product where mask has the same rank as feature and every
/// mask dimension equals the feature dimension or 1. Output has the
/// feature's shape. With equal shapes this is the plain Hadamard product.
template <typename T>
Tensor<T> mul_broadcast(const Tensor<T>& feature, const Tensor<T>& mask);

/// [N,Ca,H,W] ++ [N,Cb,H,W] -> [N,Ca+Cb,H,W]
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// x [N,Din], weight [Dout,Din], bias [Dout] -> x * weight^T + bias
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Row-wise Euclidean distance, [N,D] x [N,D] -> [N]. The backward pass
/// divides by sqrt(d^2 + 1e-12), so coincident rows get a zero gradient.
template <typename T>
Tensor<T> euclidean_distance(const Tensor<T>& a, const Tensor<T>& b);

/// Row-wise unit-norm scaling of [N,D].
template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x);

/// Reductions to a shape-[1] tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Stacks equally shaped [C,H,W] tensors into [N,C,H,W]. Not recorded.
template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& items);

/// Row n of a [N,...] tensor as a [1,...] tensor. Not recorded.
template <typename T>
Tensor<T> batch_item(const Tensor<T>& batch, std::size_t n);

}  // namespace logonet
