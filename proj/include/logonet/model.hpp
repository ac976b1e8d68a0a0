#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "logonet/attention.hpp"
#include "logonet/tensor.hpp"

namespace logonet {

/// Architecture of the embedding network.
///
/// Pipeline: first conv (first_kernel, stride 1, padding first_kernel/2)
/// -> per stage [3x3 conv, ReLU, hybrid attention, 2x2 max pool]
/// -> global average pool -> linear head -> optional L2 normalization.
///
/// With an even first_kernel the first conv grows each side by one pixel
/// (64 -> 65 for k = 6); odd kernels preserve the size.
struct LogoNetConfig {
  std::size_t input_channels = 1;
  std::size_t input_size = 64;
  std::size_t first_kernel = 6;
  std::vector<std::size_t> stage_channels{32, 64, 128};
  std::size_t embed_dim = 128;
  /// One entry per stage. Empty means default_placement(stages, true, true).
  std::vector<AttentionMode> attention_modes;
  std::size_t reduction_ratio = 8;
  std::size_t spatial_kernel = 7;
  bool normalize_embedding = true;

  /// Attention mode of stage i after resolving the empty default.
  AttentionMode stage_attention(std::size_t stage) const;
  std::vector<AttentionMode> resolved_attention() const;

  /// Spatial side length entering each stage, then after the last pool.
  std::vector<std::size_t> stage_sizes() const;

  /// Every violated invariant, one message each; empty when valid.
  std::vector<std::string> violations() const;
  /// Throws ConfigError listing all violations.
  void validate() const;

  /// Canonical key=value text, one key per line in fixed order.
  std::string to_text() const;
  /// Applies one key=value assignment; throws ConfigError on unknown keys.
  void set(std::string_view key, std::string_view value);
  static LogoNetConfig from_text(std::string_view text);

  bool operator==(const LogoNetConfig&) const = default;
};

/// Spatial attention on every stage except the deepest (largest maps),
/// channel attention on every stage except the first (most channels);
/// a single stage gets whatever is enabled. Disabled kinds are dropped.
std::vector<AttentionMode> default_placement(std::size_t stages, bool channel, bool spatial);

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct Stage {
  Tensor<T> conv_weight;  // [C_out, C_in, 3, 3]
  Tensor<T> conv_bias;    // [C_out]
  HybridAttention<T> attention;
};

/// Parameters of the embedding function. The same instance embeds
/// sketches and images, so the three triplet branches share weights.
///
/// Parameter order (also the checkpoint record order):
///   first_conv.weight, first_conv.bias,
///   for each stage s = 1..S:
///     stage<s>.conv.weight, stage<s>.conv.bias,
///     stage<s>.ca.fc1.weight, stage<s>.ca.fc1.bias,
///     stage<s>.ca.fc2.weight, stage<s>.ca.fc2.bias   (when the stage uses CA)
///     stage<s>.sa.conv.weight, stage<s>.sa.conv.bias (when the stage uses SA)
///   head.weight, head.bias
template <typename T>
class BasicModel {
 public:
  explicit BasicModel(LogoNetConfig config);

  const LogoNetConfig& config() const { return config_; }

  std::vector<NamedParameter<T>> parameters() const;
  std::size_t parameter_count() const;

  /// Converts every parameter; used to evaluate the model in double precision.
  template <typename U>
  BasicModel<U> cast() const;

  Tensor<T> first_weight;
  Tensor<T> first_bias;
  std::vector<Stage<T>> stages;
  Tensor<T> head_weight;
  Tensor<T> head_bias;

 private:
  LogoNetConfig config_;
};

using LogoNetModel = BasicModel<float>;

/// Deterministic given (config, seed): conv and linear weights are uniform in
/// +-sqrt(6 / fan_in), biases zero.
LogoNetModel init_model(const LogoNetConfig& config, std::uint64_t seed);

/// Closed-form parameter count implied by a configuration.
std::size_t expected_parameter_count(const LogoNetConfig& config);

/// images [N,C,S,S] -> [N,embed_dim].
template <typename T>
Tensor<T> embed(const BasicModel<T>& model, const Tensor<T>& images);

template <typename T>
struct TripletEmbeddings {
  Tensor<T> anchor;
  Tensor<T> positive;
  Tensor<T> negative;
};

/// Runs all three branches through the same parameters on one graph.
template <typename T>
TripletEmbeddings<T> embed_triplet(const BasicModel<T>& model, const Tensor<T>& sketches,
                                   const Tensor<T>& positives, const Tensor<T>& negatives);

/// Hex digest over the canonical config text and every parameter byte.
std::string fingerprint(const LogoNetModel& model);

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
  BasicModel<U> out(config_);
  auto dst = out.parameters();
  auto src = parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto converted = src[i].tensor.template cast<U>();
    std::copy(converted.data().begin(), converted.data().end(), dst[i].tensor.data().begin());
  }
  return out;
}

extern template class BasicModel<float>;
extern template class BasicModel<double>;

}  // namespace logonet
