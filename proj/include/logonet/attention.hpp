#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "logonet/tensor.hpp"

namespace logonet {

enum class AttentionMode { none, channel, spatial, both };

std::string_view to_string(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view text);

inline bool uses_channel(AttentionMode m) { return m == AttentionMode::channel || m == AttentionMode::both; }
inline bool uses_spatial(AttentionMode m) { return m == AttentionMode::spatial || m == AttentionMode::both; }

/// Shared bottleneck MLP applied to the avg- and max-pooled channel
/// descriptors: C -> C/r -> C.
template <typename T>
struct ChannelAttentionParams {
  Tensor<T> fc1_weight;  // [C/r, C]
  Tensor<T> fc1_bias;    // [C/r]
  Tensor<T> fc2_weight;  // [C, C/r]
  Tensor<T> fc2_bias;    // [C]
  std::size_t reduction = 8;

  std::size_t channels() const { return fc1_weight.dim(1); }
  std::size_t hidden() const { return fc1_weight.dim(0); }
};

/// k x k convolution over the stacked channel-mean and channel-max maps.
template <typename T>
struct SpatialAttentionParams {
  Tensor<T> weight;  // [1, 2, k, k]
  Tensor<T> bias;    // [1]

  std::size_t kernel() const { return weight.dim(2); }
};

/// Attention parameters of one backbone stage. A mode may only be applied
/// when the parameters it needs are present.
template <typename T>
struct HybridAttention {
  std::optional<ChannelAttentionParams<T>> channel;
  std::optional<SpatialAttentionParams<T>> spatial;
};

/// Fan-in scaled uniform weights, zero biases. Throws ConfigError unless r divides C.
template <typename T>
ChannelAttentionParams<T> make_channel_attention(std::size_t channels, std::size_t reduction,
                                                 std::mt19937_64& rng);
/// Throws ConfigError unless kernel is odd.
template <typename T>
SpatialAttentionParams<T> make_spatial_attention(std::size_t kernel, std::mt19937_64& rng);

/// All-zero parameters, for which every mask is exactly 0.5.
template <typename T>
ChannelAttentionParams<T> zero_channel_attention(std::size_t channels, std::size_t reduction);
template <typename T>
SpatialAttentionParams<T> zero_spatial_attention(std::size_t kernel);

/// sigmoid(MLP(avgpool(F)) + MLP(maxpool(F))) as a [N,C,1,1] mask.
template <typename T>
Tensor<T> channel_attention(const Tensor<T>& features, const ChannelAttentionParams<T>& params);

/// sigmoid(conv([mean_c(F); max_c(F)])) as a [N,1,H,W] mask; the convolution
/// is padded by (k-1)/2 so the map keeps its size.
template <typename T>
Tensor<T> spatial_attention(const Tensor<T>& features, const SpatialAttentionParams<T>& params);

/// Channel mask first, then the spatial mask computed from the
/// channel-refined map. Mode none returns the input handle itself.
template <typename T>
Tensor<T> apply_hybrid(const Tensor<T>& features, const HybridAttention<T>& attention,
                       AttentionMode mode);

}  // namespace logonet
