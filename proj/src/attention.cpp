#include "logonet/attention.hpp"

#include <cmath>

#include "logonet/error.hpp"
#include "logonet/ops.hpp"

namespace logonet {

std::string_view to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::none: return "none";
    case AttentionMode::channel: return "ca";
    case AttentionMode::spatial: return "sa";
    case AttentionMode::both: return "both";
  }
  return "none";
}

AttentionMode parse_attention_mode(std::string_view text) {
  if (text == "none") return AttentionMode::none;
  if (text == "ca" || text == "channel") return AttentionMode::channel;
  if (text == "sa" || text == "spatial") return AttentionMode::spatial;
  if (text == "both") return AttentionMode::both;
  throw ConfigError("unknown attention mode '" + std::string(text) +
                    "' (expected none, ca, sa or both)");
}

namespace {

template <typename T>
Tensor<T> uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t.set_requires_grad(true);
}

template <typename T>
Tensor<T> zeros(Shape shape) {
  Tensor<T> t(std::move(shape));
  return t.set_requires_grad(true);
}

void check_channel_config(std::size_t channels, std::size_t reduction) {
  if (reduction == 0 || channels % reduction != 0) {
    throw ConfigError("channel attention: reduction ratio " + std::to_string(reduction) +
                      " must divide channel count " + std::to_string(channels));
  }
}

void check_spatial_config(std::size_t kernel) {
  if (kernel % 2 == 0) {
    throw ConfigError("spatial attention kernel must be odd, got " + std::to_string(kernel));
  }
}

template <typename T>
Tensor<T> shared_mlp(const Tensor<T>& descriptor, const ChannelAttentionParams<T>& p) {
  const std::size_t N = descriptor.dim(0), C = descriptor.dim(1);
  Tensor<T> flat = reshape(descriptor, Shape{N, C});
  Tensor<T> hidden = relu(linear(flat, p.fc1_weight, p.fc1_bias));
  return linear(hidden, p.fc2_weight, p.fc2_bias);
}

}  // namespace

template <typename T>
ChannelAttentionParams<T> make_channel_attention(std::size_t channels, std::size_t reduction,
                                                 std::mt19937_64& rng) {
  check_channel_config(channels, reduction);
  const std::size_t hidden = channels / reduction;
  ChannelAttentionParams<T> p;
  p.fc1_weight = uniform<T>(Shape{hidden, channels}, channels, rng);
  p.fc1_bias = zeros<T>(Shape{hidden});
  p.fc2_weight = uniform<T>(Shape{channels, hidden}, hidden, rng);
  p.fc2_bias = zeros<T>(Shape{channels});
  p.reduction = reduction;
  return p;
}

template <typename T>
SpatialAttentionParams<T> make_spatial_attention(std::size_t kernel, std::mt19937_64& rng) {
  check_spatial_config(kernel);
  SpatialAttentionParams<T> p;
  p.weight = uniform<T>(Shape{1, 2, kernel, kernel}, 2 * kernel * kernel, rng);
  p.bias = zeros<T>(Shape{1});
  return p;
}

template <typename T>
ChannelAttentionParams<T> zero_channel_attention(std::size_t channels, std::size_t reduction) {
  check_channel_config(channels, reduction);
  const std::size_t hidden = channels / reduction;
  return {zeros<T>(Shape{hidden, channels}), zeros<T>(Shape{hidden}),
          zeros<T>(Shape{channels, hidden}), zeros<T>(Shape{channels}), reduction};
}

template <typename T>
SpatialAttentionParams<T> zero_spatial_attention(std::size_t kernel) {
  check_spatial_config(kernel);
  return {zeros<T>(Shape{1, 2, kernel, kernel}), zeros<T>(Shape{1})};
}

template <typename T>
Tensor<T> channel_attention(const Tensor<T>& features, const ChannelAttentionParams<T>& params) {
  if (features.rank() != 4 || features.dim(1) != params.channels()) {
    throw ShapeError("channel_attention: features " + shape_string(features.shape()) +
                     " do not have " + std::to_string(params.channels()) + " channels");
  }
  const std::size_t N = features.dim(0), C = features.dim(1);
  Tensor<T> logits = add(shared_mlp(global_avgpool(features), params),
                         shared_mlp(global_maxpool(features), params));
  return reshape(sigmoid(logits), Shape{N, C, 1, 1});
}

template <typename T>
Tensor<T> spatial_attention(const Tensor<T>& features, const SpatialAttentionParams<T>& params) {
  if (features.rank() != 4) {
    throw ShapeError("spatial_attention: expected [N,C,H,W], got " + shape_string(features.shape()));
  }
  Tensor<T> pooled = concat_channels(channel_mean(features), channel_max(features));
  const std::size_t pad = (params.kernel() - 1) / 2;
  return sigmoid(conv2d(pooled, params.weight, params.bias, 1, pad));
}

template <typename T>
Tensor<T> apply_hybrid(const Tensor<T>& features, const HybridAttention<T>& attention,
                       AttentionMode mode) {
  if (uses_channel(mode) && !attention.channel) {
    throw ConfigError("attention mode '" + std::string(to_string(mode)) +
                      "' needs channel attention parameters");
  }
  if (uses_spatial(mode) && !attention.spatial) {
    throw ConfigError("attention mode '" + std::string(to_string(mode)) +
                      "' needs spatial attention parameters");
  }
  Tensor<T> out = features;
  if (uses_channel(mode)) out = mul_broadcast(out, channel_attention(out, *attention.channel));
  if (uses_spatial(mode)) out = mul_broadcast(out, spatial_attention(out, *attention.spatial));
  return out;
}

#define LOGONET_INSTANTIATE_ATTENTION(T)                                                       \
  template ChannelAttentionParams<T> make_channel_attention<T>(std::size_t, std::size_t,       \
                                                               std::mt19937_64&);              \
  template SpatialAttentionParams<T> make_spatial_attention<T>(std::size_t, std::mt19937_64&); \
  template ChannelAttentionParams<T> zero_channel_attention<T>(std::size_t, std::size_t);      \
  template SpatialAttentionParams<T> zero_spatial_attention<T>(std::size_t);                   \
  template Tensor<T> channel_attention(const Tensor<T>&, const ChannelAttentionParams<T>&);    \
  template Tensor<T> spatial_attention(const Tensor<T>&, const SpatialAttentionParams<T>&);    \
  template Tensor<T> apply_hybrid(const Tensor<T>&, const HybridAttention<T>&, AttentionMode);

LOGONET_INSTANTIATE_ATTENTION(float)
LOGONET_INSTANTIATE_ATTENTION(double)

#undef LOGONET_INSTANTIATE_ATTENTION

}  // namespace logonet
