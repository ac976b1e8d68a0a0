#include "logonet/model.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <random>
#include <sstream>

#include "logonet/config_text.hpp"
#include "logonet/error.hpp"
#include "logonet/ops.hpp"

namespace logonet {

std::vector<AttentionMode> default_placement(std::size_t stages, bool channel, bool spatial) {
  std::vector<AttentionMode> modes(stages, AttentionMode::none);
  for (std::size_t i = 0; i < stages; ++i) {
    const bool ca = channel && (stages == 1 || i > 0);
    const bool sa = spatial && (stages == 1 || i + 1 < stages);
    modes[i] = ca && sa ? AttentionMode::both
               : ca     ? AttentionMode::channel
               : sa     ? AttentionMode::spatial
                        : AttentionMode::none;
  }
  return modes;
}

AttentionMode LogoNetConfig::stage_attention(std::size_t stage) const {
  if (attention_modes.empty()) return default_placement(stage_channels.size(), true, true).at(stage);
  return attention_modes.at(stage);
}

std::vector<AttentionMode> LogoNetConfig::resolved_attention() const {
  if (attention_modes.empty()) return default_placement(stage_channels.size(), true, true);
  return attention_modes;
}

std::vector<std::size_t> LogoNetConfig::stage_sizes() const {
  std::vector<std::size_t> sizes;
  std::size_t side = input_size + 2 * (first_kernel / 2) + 1 - first_kernel;
  sizes.push_back(side);
  for (std::size_t i = 0; i < stage_channels.size(); ++i) {
    side /= 2;
    sizes.push_back(side);
  }
  return sizes;
}

std::vector<std::string> LogoNetConfig::violations() const {
  std::vector<std::string> out;
  if (input_channels == 0) out.push_back("input_channels must be >= 1");
  if (input_size < 2) out.push_back("input_size must be >= 2");
  if (first_kernel < 1 || first_kernel > 9) out.push_back("first_kernel must be in 1..9");
  if (stage_channels.empty()) out.push_back("stage_channels must not be empty");
  for (std::size_t c : stage_channels) {
    if (c == 0) out.push_back("stage_channels entries must be >= 1");
  }
  if (embed_dim < 2) out.push_back("embed_dim must be >= 2");
  if (!attention_modes.empty() && attention_modes.size() != stage_channels.size()) {
    out.push_back("attention needs one mode per stage (" + std::to_string(stage_channels.size()) +
                  "), got " + std::to_string(attention_modes.size()));
  }
  if (spatial_kernel % 2 == 0) out.push_back("spatial_kernel must be odd");
  if (reduction_ratio == 0) out.push_back("reduction_ratio must be >= 1");
  const bool modes_ok = attention_modes.empty() || attention_modes.size() == stage_channels.size();
  if (modes_ok && reduction_ratio > 0) {
    for (std::size_t i = 0; i < stage_channels.size(); ++i) {
      if (uses_channel(stage_attention(i)) && stage_channels[i] % reduction_ratio != 0) {
        out.push_back("reduction_ratio " + std::to_string(reduction_ratio) +
                      " must divide stage " + std::to_string(i + 1) + " channels " +
                      std::to_string(stage_channels[i]));
      }
    }
  }
  if (input_size >= 2 && first_kernel >= 1 && first_kernel <= 9 && !stage_channels.empty()) {
    const auto sizes = stage_sizes();
    for (std::size_t i = 0; i < stage_channels.size(); ++i) {
      if (sizes[i] < 2) {
        out.push_back("input_size " + std::to_string(input_size) + " too small for " +
                      std::to_string(stage_channels.size()) + " pooling stages");
        break;
      }
    }
  }
  return out;
}

void LogoNetConfig::validate() const {
  const auto problems = violations();
  if (problems.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ConfigError(msg);
}


std::string LogoNetConfig::to_text() const {
  std::ostringstream os;
  os << "input_channels=" << input_channels << '\n'
     << "input_size=" << input_size << '\n'
     << "first_kernel=" << first_kernel << '\n'
     << "stage_channels=";
  for (std::size_t i = 0; i < stage_channels.size(); ++i) os << (i ? "," : "") << stage_channels[i];
  os << '\n' << "embed_dim=" << embed_dim << '\n' << "attention=";
  const auto modes = resolved_attention();
  for (std::size_t i = 0; i < modes.size(); ++i) os << (i ? "," : "") << to_string(modes[i]);
  os << '\n'
     << "reduction_ratio=" << reduction_ratio << '\n'
     << "spatial_kernel=" << spatial_kernel << '\n'
     << "normalize_embedding=" << (normalize_embedding ? 1 : 0) << '\n';
  return os.str();
}

void LogoNetConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "input_channels") {
    input_channels = parse_int<std::size_t>(key, value);
  } else if (key == "input_size") {
    input_size = parse_int<std::size_t>(key, value);
  } else if (key == "first_kernel") {
    first_kernel = parse_int<std::size_t>(key, value);
  } else if (key == "stage_channels") {
    stage_channels.clear();
    for (auto part : split_list(value)) stage_channels.push_back(parse_int<std::size_t>(key, trim(part)));
  } else if (key == "embed_dim") {
    embed_dim = parse_int<std::size_t>(key, value);
  } else if (key == "attention") {
    attention_modes.clear();
    for (auto part : split_list(value)) attention_modes.push_back(parse_attention_mode(trim(part)));
  } else if (key == "reduction_ratio") {
    reduction_ratio = parse_int<std::size_t>(key, value);
  } else if (key == "spatial_kernel") {
    spatial_kernel = parse_int<std::size_t>(key, value);
  } else if (key == "normalize_embedding") {
    normalize_embedding = parse_bool(key, value);
  } else {
    throw ConfigError("unknown model config key '" + std::string(key) + "'");
  }
}

LogoNetConfig LogoNetConfig::from_text(std::string_view text) {
  LogoNetConfig config;
  for (const auto& [key, value] : parse_assignments(text)) config.set(key, value);
  return config;
}

template <typename T>
BasicModel<T>::BasicModel(LogoNetConfig config) : config_(std::move(config)) {
  config_.validate();
  auto param = [](Shape shape) { return Tensor<T>(std::move(shape)).set_requires_grad(true); };
  const std::size_t k = config_.first_kernel;
  const std::size_t c0 = config_.stage_channels.front();
  first_weight = param({c0, config_.input_channels, k, k});
  first_bias = param({c0});
  std::size_t in = c0;
  for (std::size_t i = 0; i < config_.stage_channels.size(); ++i) {
    const std::size_t out = config_.stage_channels[i];
    Stage<T> stage;
    stage.conv_weight = param({out, in, 3, 3});
    stage.conv_bias = param({out});
    const AttentionMode mode = config_.stage_attention(i);
    if (uses_channel(mode)) {
      stage.attention.channel = zero_channel_attention<T>(out, config_.reduction_ratio);
    }
    if (uses_spatial(mode)) {
      stage.attention.spatial = zero_spatial_attention<T>(config_.spatial_kernel);
    }
    stages.push_back(std::move(stage));
    in = out;
  }
  head_weight = param({config_.embed_dim, in});
  head_bias = param({config_.embed_dim});
}

template <typename T>
std::vector<NamedParameter<T>> BasicModel<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  out.push_back({"first_conv.weight", first_weight});
  out.push_back({"first_conv.bias", first_bias});
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string prefix = "stage" + std::to_string(i + 1) + ".";
    const Stage<T>& s = stages[i];
    out.push_back({prefix + "conv.weight", s.conv_weight});
    out.push_back({prefix + "conv.bias", s.conv_bias});
    if (s.attention.channel) {
      out.push_back({prefix + "ca.fc1.weight", s.attention.channel->fc1_weight});
      out.push_back({prefix + "ca.fc1.bias", s.attention.channel->fc1_bias});
      out.push_back({prefix + "ca.fc2.weight", s.attention.channel->fc2_weight});
      out.push_back({prefix + "ca.fc2.bias", s.attention.channel->fc2_bias});
    }
    if (s.attention.spatial) {
      out.push_back({prefix + "sa.conv.weight", s.attention.spatial->weight});
      out.push_back({prefix + "sa.conv.bias", s.attention.spatial->bias});
    }
  }
  out.push_back({"head.weight", head_weight});
  out.push_back({"head.bias", head_bias});
  return out;
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template class BasicModel<float>;
template class BasicModel<double>;

std::size_t expected_parameter_count(const LogoNetConfig& config) {
  config.validate();
  const std::size_t k = config.first_kernel;
  const std::size_t c0 = config.stage_channels.front();
  std::size_t count = c0 * config.input_channels * k * k + c0;
  std::size_t in = c0;
  for (std::size_t i = 0; i < config.stage_channels.size(); ++i) {
    const std::size_t c = config.stage_channels[i];
    count += c * in * 9 + c;
    const AttentionMode mode = config.stage_attention(i);
    if (uses_channel(mode)) {
      const std::size_t h = c / config.reduction_ratio;
      count += (h * c + h) + (c * h + c);
    }
    if (uses_spatial(mode)) count += 2 * config.spatial_kernel * config.spatial_kernel + 1;
    in = c;
  }
  return count + config.embed_dim * in + config.embed_dim;
}

LogoNetModel init_model(const LogoNetConfig& config, std::uint64_t seed) {
  LogoNetModel model(config);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Tensor<float>& t, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data()) v = static_cast<float>(dist(rng));
  };
  const std::size_t k = config.first_kernel;
  fill(model.first_weight, config.input_channels * k * k);
  std::size_t in = config.stage_channels.front();
  for (std::size_t i = 0; i < model.stages.size(); ++i) {
    auto& stage = model.stages[i];
    fill(stage.conv_weight, in * 9);
    if (stage.attention.channel) {
      auto& ca = *stage.attention.channel;
      fill(ca.fc1_weight, ca.channels());
      fill(ca.fc2_weight, ca.hidden());
    }
    if (stage.attention.spatial) {
      auto& sa = *stage.attention.spatial;
      fill(sa.weight, 2 * sa.kernel() * sa.kernel());
    }
    in = config.stage_channels[i];
  }
  fill(model.head_weight, in);
  return model;
}

template <typename T>
Tensor<T> embed(const BasicModel<T>& model, const Tensor<T>& images) {
  const LogoNetConfig& cfg = model.config();
  if (images.rank() != 4 || images.dim(1) != cfg.input_channels ||
      images.dim(2) != cfg.input_size || images.dim(3) != cfg.input_size) {
    throw ShapeError("embed: expected images [N," + std::to_string(cfg.input_channels) + "," +
                     std::to_string(cfg.input_size) + "," + std::to_string(cfg.input_size) +
                     "], got " + shape_string(images.shape()));
  }
  Tensor<T> x = conv2d(images, model.first_weight, model.first_bias, 1, cfg.first_kernel / 2);
  for (std::size_t i = 0; i < model.stages.size(); ++i) {
    const Stage<T>& stage = model.stages[i];
    x = relu(conv2d(x, stage.conv_weight, stage.conv_bias, 1, 1));
    x = apply_hybrid(x, stage.attention, cfg.stage_attention(i));
    x = maxpool2d(x, 2, 2);
  }
  const std::size_t N = x.dim(0), C = x.dim(1);
  x = linear(reshape(global_avgpool(x), Shape{N, C}), model.head_weight, model.head_bias);
  return cfg.normalize_embedding ? l2_normalize(x) : x;
}

template <typename T>
TripletEmbeddings<T> embed_triplet(const BasicModel<T>& model, const Tensor<T>& sketches,
                                   const Tensor<T>& positives, const Tensor<T>& negatives) {
  if (sketches.shape() != positives.shape() || sketches.shape() != negatives.shape()) {
    throw ShapeError("embed_triplet: branch shapes differ: " + shape_string(sketches.shape()) +
                     ", " + shape_string(positives.shape()) + ", " +
                     shape_string(negatives.shape()));
  }
  return {embed(model, sketches), embed(model, positives), embed(model, negatives)};
}

template Tensor<float> embed(const BasicModel<float>&, const Tensor<float>&);
template Tensor<double> embed(const BasicModel<double>&, const Tensor<double>&);
template TripletEmbeddings<float> embed_triplet(const BasicModel<float>&, const Tensor<float>&,
                                                const Tensor<float>&, const Tensor<float>&);
template TripletEmbeddings<double> embed_triplet(const BasicModel<double>&, const Tensor<double>&,
                                                 const Tensor<double>&, const Tensor<double>&);

std::string fingerprint(const LogoNetModel& model) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw Error("fingerprint: cannot allocate digest context");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  const std::string text = model.config().to_text();
  EVP_DigestUpdate(ctx, text.data(), text.size());
  for (const auto& p : model.parameters()) {
    EVP_DigestUpdate(ctx, p.name.data(), p.name.size());
    EVP_DigestUpdate(ctx, p.tensor.data().data(), p.tensor.numel() * sizeof(float));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < 8 && i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

}  // namespace logonet
