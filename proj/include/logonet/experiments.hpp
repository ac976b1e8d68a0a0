#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "logonet/dataset.hpp"
#include "logonet/model.hpp"
#include "logonet/retrieval.hpp"
#include "logonet/training.hpp"

namespace logonet {

/// Trains a fresh model (seeded with train.seed) on the train split and
/// evaluates it on the test split.
EvalReport train_and_evaluate(const LogoNetConfig& config, const DatasetImages& data,
                              const TrainConfig& train_config);

struct SweepRow {
  std::size_t kernel = 0;
  EvalCell result;
};

/// One cell per first-conv kernel size in [1, 9], otherwise identical.
std::vector<SweepRow> kernel_sweep(const LogoNetConfig& base, std::span<const std::size_t> kernels,
                                   const DatasetImages& data, const TrainConfig& train_config,
                                   const std::function<void(const SweepRow&)>& on_row = {});
/// `kernel,acc1,acc5,acc10`
std::string sweep_csv(std::span<const SweepRow> rows);

struct AblationToggle {
  bool channel = false;
  bool spatial = false;
  bool large_kernel = false;
};

/// baseline, CA, SA, large kernel, CA+SA, CA+large kernel, SA+large
/// kernel, all three.
std::vector<AblationToggle> ablation_grid();

/// Attention placed by default_placement with the enabled kinds; the first
/// kernel is base.first_kernel with the large kernel on and 3 otherwise.
LogoNetConfig ablation_config(const LogoNetConfig& base, const AblationToggle& toggle);

struct AblationRow {
  AblationToggle toggle;
  EvalCell result;
};

std::vector<AblationRow> ablate(const LogoNetConfig& base, const DatasetImages& data,
                                const TrainConfig& train_config,
                                const std::function<void(const AblationRow&)>& on_row = {});
/// `baseline,ca,sa,large_kernel,acc1,acc5,acc10`
std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace logonet
