#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "logonet/dataset.hpp"
#include "logonet/model.hpp"
#include "logonet/tensor.hpp"

namespace logonet {

using Rng = std::mt19937_64;

struct AugmentConfig {
  double crop_fraction = 0.9;
  double hflip_prob = 0.5;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double margin = 0.2;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;
  AugmentConfig augmentation;
  /// Triplets drawn per epoch; 0 means one per training sketch.
  std::size_t triplets_per_epoch = 0;
  /// Held-out acc@1 every this many epochs; 0 disables it.
  std::size_t validate_every = 0;

  std::vector<std::string> violations() const;
  void validate() const;
  std::string to_text() const;
  void set(std::string_view key, std::string_view value);
  static TrainConfig from_text(std::string_view text);
};

/// mean over rows of max(0, margin + |s - p| - |s - n|) for [N,D] inputs.
template <typename T>
Tensor<T> triplet_loss(const Tensor<T>& anchor, const Tensor<T>& positive,
                       const Tensor<T>& negative, T margin);

/// Indices into a manifest: anchor into sketches, the others into logos.
struct Triplet {
  std::size_t anchor_sketch = 0;
  std::size_t positive_logo = 0;
  std::size_t negative_logo = 0;

  bool operator==(const Triplet&) const = default;
};

/// Anchor: uniform over the sketches of one split. Positive: the anchor's
/// logo. Negative: uniform over every other logo.
class TripletSampler {
 public:
  TripletSampler(const DatasetManifest& manifest, Split split, std::uint64_t seed);

  Triplet next();
  std::size_t anchor_count() const { return anchors_.size(); }

 private:
  std::vector<std::size_t> anchors_;
  std::vector<std::size_t> sketch_logo_;
  std::size_t logo_count_;
  Rng rng_;
};

struct CropWindow {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t side = 0;
};

/// Side round(crop_fraction * size), offsets uniform over the valid range.
CropWindow draw_crop(std::size_t size, double crop_fraction, Rng& rng);
/// Cuts the window out of [C,S,S] and resizes it bilinearly back to S.
Tensor<float> crop_resize(const Tensor<float>& image, const CropWindow& window);
Tensor<float> hflip(const Tensor<float>& image);
Tensor<float> augment(const Tensor<float>& image, const AugmentConfig& config, Rng& rng);

struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its gradient.
/// Throws Error if a parameter has no gradient.
template <typename T>
void adam_step(const std::vector<NamedParameter<T>>& params, AdamState& state,
               const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> val_acc1;
  double wall_seconds = 0.0;
};

using TrainLog = std::vector<EpochRecord>;

/// Called after every epoch. Returning false stops training after that epoch.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Trains on the manifest's train split. Each step samples batch_size
/// triplets, augments every image independently, embeds the three branches
/// with shared weights and applies one Adam update on the mean loss.
TrainLog train(LogoNetModel& model, const DatasetImages& data, const TrainConfig& config,
               const EpochCallback& on_epoch = {});

/// `epoch,mean_loss,val_acc1,wall_seconds`, val_acc1 empty when absent.
std::string train_log_csv(const TrainLog& log);
std::string epoch_csv_line(const EpochRecord& record);

}  // namespace logonet
