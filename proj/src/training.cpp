#include "logonet/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "logonet/autograd.hpp"
#include "logonet/config_text.hpp"
#include "logonet/error.hpp"
#include "logonet/image.hpp"
#include "logonet/ops.hpp"
#include "logonet/retrieval.hpp"

namespace logonet {

std::vector<std::string> TrainConfig::violations() const {
  std::vector<std::string> out;
  if (!(learning_rate >= 0.0)) out.push_back("learning_rate must be >= 0");
  if (!(margin >= 0.0)) out.push_back("margin must be >= 0");
  if (batch_size == 0) out.push_back("batch_size must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) out.push_back("adam_beta1 must be in [0,1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) out.push_back("adam_beta2 must be in [0,1)");
  if (!(adam_eps > 0.0)) out.push_back("adam_eps must be positive");
  if (!(augmentation.crop_fraction > 0.0 && augmentation.crop_fraction <= 1.0))
    out.push_back("crop_fraction must be in (0,1]");
  if (!(augmentation.hflip_prob >= 0.0 && augmentation.hflip_prob <= 1.0))
    out.push_back("hflip_prob must be in [0,1]");
  return out;
}

void TrainConfig::validate() const {
  const auto problems = violations();
  if (problems.empty()) return;
  std::string message = "invalid training config:";
  for (const auto& p : problems) message += "\n  " + p;
  throw ConfigError(message);
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "learning_rate=" << format_real(learning_rate) << '\n'
     << "margin=" << format_real(margin) << '\n'
     << "batch_size=" << batch_size << '\n'
     << "epochs=" << epochs << '\n'
     << "adam_beta1=" << format_real(adam_beta1) << '\n'
     << "adam_beta2=" << format_real(adam_beta2) << '\n'
     << "adam_eps=" << format_real(adam_eps) << '\n'
     << "seed=" << seed << '\n'
     << "crop_fraction=" << format_real(augmentation.crop_fraction) << '\n'
     << "hflip_prob=" << format_real(augmentation.hflip_prob) << '\n'
     << "triplets_per_epoch=" << triplets_per_epoch << '\n'
     << "validate_every=" << validate_every << '\n';
  return os.str();
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "learning_rate") learning_rate = parse_real(key, value);
  else if (key == "margin") margin = parse_real(key, value);
  else if (key == "batch_size") batch_size = parse_int<std::size_t>(key, value);
  else if (key == "epochs") epochs = parse_int<std::size_t>(key, value);
  else if (key == "adam_beta1") adam_beta1 = parse_real(key, value);
  else if (key == "adam_beta2") adam_beta2 = parse_real(key, value);
  else if (key == "adam_eps") adam_eps = parse_real(key, value);
  else if (key == "seed") seed = parse_int<std::uint64_t>(key, value);
  else if (key == "crop_fraction") augmentation.crop_fraction = parse_real(key, value);
  else if (key == "hflip_prob") augmentation.hflip_prob = parse_real(key, value);
  else if (key == "triplets_per_epoch") triplets_per_epoch = parse_int<std::size_t>(key, value);
  else if (key == "validate_every") validate_every = parse_int<std::size_t>(key, value);
  else throw ConfigError("unknown training config key '" + std::string(key) + "'");
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  TrainConfig config;
  for (const auto& [key, value] : parse_assignments(text)) config.set(key, value);
  return config;
}

template <typename T>
Tensor<T> triplet_loss(const Tensor<T>& anchor, const Tensor<T>& positive,
                       const Tensor<T>& negative, T margin) {
  if (anchor.rank() != 2 || anchor.shape() != positive.shape() ||
      anchor.shape() != negative.shape()) {
    throw ShapeError("triplet_loss: expected three equal [N,D] shapes, got " +
                     shape_string(anchor.shape()) + ", " + shape_string(positive.shape()) + ", " +
                     shape_string(negative.shape()));
  }
  if (!(margin >= T(0))) throw ConfigError("triplet_loss: margin must be >= 0");
  const auto d_pos = euclidean_distance(anchor, positive);
  const auto d_neg = euclidean_distance(anchor, negative);
  return mean(relu(add_scalar(sub(d_pos, d_neg), margin)));
}

template Tensor<float> triplet_loss(const Tensor<float>&, const Tensor<float>&,
                                    const Tensor<float>&, float);
template Tensor<double> triplet_loss(const Tensor<double>&, const Tensor<double>&,
                                     const Tensor<double>&, double);

TripletSampler::TripletSampler(const DatasetManifest& manifest, Split split, std::uint64_t seed)
    : sketch_logo_(manifest.sketch_logo_indices()), logo_count_(manifest.logos.size()), rng_(seed) {
  if (logo_count_ < 2) throw ConfigError("triplet sampling needs at least 2 instances");
  for (std::size_t i = 0; i < manifest.sketches.size(); ++i)
    if (manifest.sketches[i].split == split) anchors_.push_back(i);
  if (anchors_.empty())
    throw ConfigError("triplet sampling: no sketches in split '" + std::string(to_string(split)) + "'");
}

Triplet TripletSampler::next() {
  std::uniform_int_distribution<std::size_t> pick_anchor(0, anchors_.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, logo_count_ - 2);
  Triplet t;
  t.anchor_sketch = anchors_[pick_anchor(rng_)];
  t.positive_logo = sketch_logo_[t.anchor_sketch];
  const std::size_t other = pick_other(rng_);
  t.negative_logo = other < t.positive_logo ? other : other + 1;
  return t;
}

CropWindow draw_crop(std::size_t size, double crop_fraction, Rng& rng) {
  const auto side = static_cast<std::size_t>(std::lround(crop_fraction * static_cast<double>(size)));
  if (side < 1 || side > size)
    throw ConfigError("crop side " + std::to_string(side) + " invalid for image size " +
                      std::to_string(size));
  std::uniform_int_distribution<std::size_t> offset(0, size - side);
  CropWindow w;
  w.top = offset(rng);
  w.left = offset(rng);
  w.side = side;
  return w;
}

Tensor<float> crop_resize(const Tensor<float>& image, const CropWindow& window) {
  const std::size_t channels = image.dim(0);
  const std::size_t size = image.dim(1);
  if (window.side == size) return image.clone();
  Tensor<float> crop({channels, window.side, window.side});
  const auto src = image.data();
  auto dst = crop.data();
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < window.side; ++y)
      for (std::size_t x = 0; x < window.side; ++x)
        dst[(c * window.side + y) * window.side + x] =
            src[(c * size + window.top + y) * size + window.left + x];
  return resize_bilinear(crop, size, size);
}

Tensor<float> hflip(const Tensor<float>& image) {
  Tensor<float> out(image.shape());
  const std::size_t rows = image.dim(0) * image.dim(1);
  const std::size_t width = image.dim(2);
  const auto src = image.data();
  auto dst = out.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t x = 0; x < width; ++x) dst[r * width + x] = src[r * width + width - 1 - x];
  return out;
}

Tensor<float> augment(const Tensor<float>& image, const AugmentConfig& config, Rng& rng) {
  if (image.rank() != 3 || image.dim(1) != image.dim(2))
    throw ShapeError("augment: expected [C,S,S], got " + shape_string(image.shape()));
  const CropWindow window = draw_crop(image.dim(1), config.crop_fraction, rng);
  std::bernoulli_distribution flip(config.hflip_prob);
  Tensor<float> out = crop_resize(image, window);
  return flip(rng) ? hflip(out) : out;
}

template <typename T>
void adam_step(const std::vector<NamedParameter<T>>& params, AdamState& state,
               const TrainConfig& config) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.numel(), 0.0f);
      state.v.emplace_back(p.tensor.numel(), 0.0f);
    }
  }
  if (state.m.size() != params.size()) throw Error("adam_step: optimizer state does not match parameters");
  for (const auto& p : params)
    if (!p.tensor.has_grad()) throw Error("adam_step: parameter '" + p.name + "' has no gradient");

  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = config.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].tensor.data();
    const auto grads = params[i].tensor.grad().data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != values.size()) throw Error("adam_step: moment size mismatch for '" + params[i].name + "'");
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grads[j];
      m[j] = static_cast<float>(b1 * m[j] + (1.0 - b1) * g);
      v[j] = static_cast<float>(b2 * v[j] + (1.0 - b2) * g * g);
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] = static_cast<T>(values[j] - lr * m_hat / (std::sqrt(v_hat) + config.adam_eps));
    }
  }
}

template void adam_step(const std::vector<NamedParameter<float>>&, AdamState&, const TrainConfig&);
template void adam_step(const std::vector<NamedParameter<double>>&, AdamState&, const TrainConfig&);

TrainLog train(LogoNetModel& model, const DatasetImages& data, const TrainConfig& config,
               const EpochCallback& on_epoch) {
  config.validate();
  TrainLog log;
  if (config.epochs == 0) return log;

  const auto& manifest = data.manifest;
  std::seed_seq sampler_seq{static_cast<std::uint32_t>(config.seed),
                            static_cast<std::uint32_t>(config.seed >> 32), 1u};
  std::seed_seq augment_seq{static_cast<std::uint32_t>(config.seed),
                            static_cast<std::uint32_t>(config.seed >> 32), 2u};
  std::uint64_t sampler_seed = 0;
  {
    Rng seeder(sampler_seq);
    sampler_seed = seeder();
  }
  TripletSampler sampler(manifest, Split::train, sampler_seed);
  Rng augment_rng(augment_seq);

  const std::size_t per_epoch =
      config.triplets_per_epoch > 0 ? config.triplets_per_epoch : sampler.anchor_count();
  const bool has_validation = config.validate_every > 0 && manifest.count(Split::test) > 0;
  const auto params = model.parameters();
  AdamState state;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t done = 0; done < per_epoch;) {
      const std::size_t batch = std::min(config.batch_size, per_epoch - done);
      std::vector<Tensor<float>> anchors, positives, negatives;
      for (std::size_t b = 0; b < batch; ++b) {
        const Triplet t = sampler.next();
        anchors.push_back(augment(data.sketches[t.anchor_sketch], config.augmentation, augment_rng));
        positives.push_back(augment(data.logos[t.positive_logo], config.augmentation, augment_rng));
        negatives.push_back(augment(data.logos[t.negative_logo], config.augmentation, augment_rng));
      }
      const auto e = embed_triplet(model, stack_batch(anchors), stack_batch(positives),
                                   stack_batch(negatives));
      auto loss = triplet_loss(e.anchor, e.positive, e.negative, static_cast<float>(config.margin));
      for (const auto& p : params) p.tensor.zero_grad();
      backward(loss);
      adam_step(params, state, config);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(batch);
      done += batch;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = loss_sum / static_cast<double>(per_epoch);
    if (has_validation && epoch % config.validate_every == 0)
      record.val_acc1 = evaluate(model, data, Split::test).overall.acc1;
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.push_back(record);
    if (on_epoch && !on_epoch(record)) break;
  }
  for (const auto& p : params) p.tensor.clear_grad();
  return log;
}

std::string epoch_csv_line(const EpochRecord& record) {
  char buffer[128];
  std::snprintf(buffer, sizeof buffer, "%zu,%.9g,", record.epoch, record.mean_loss);
  std::string line = buffer;
  if (record.val_acc1) {
    std::snprintf(buffer, sizeof buffer, "%.4f", *record.val_acc1);
    line += buffer;
  }
  std::snprintf(buffer, sizeof buffer, ",%.3f\n", record.wall_seconds);
  return line + buffer;
}

std::string train_log_csv(const TrainLog& log) {
  std::string out = "epoch,mean_loss,val_acc1,wall_seconds\n";
  for (const auto& r : log) out += epoch_csv_line(r);
  return out;
}

}  // namespace logonet
