#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace logonet::testing {

struct GradientCase {
  std::string name;
  /// Largest check_gradients error over all seeds and checked arguments.
  double max_error = 0.0;
  std::uint64_t worst_seed = 0;
  /// Seeds whose error exceeds kGradientTolerance.
  std::size_t failing_seeds = 0;
};

inline constexpr double kGradientTolerance = 1e-4;
inline constexpr double kGradientStep = 1e-3;
inline constexpr std::uint64_t kGradientSeeds = 10;

/// Central-difference checks in double precision for every differentiable
/// operation, both attention blocks, the triplet loss and a tiny end-to-end
/// model, each over kGradientSeeds random draws.
std::vector<GradientCase> run_gradient_suite(double step = kGradientStep);

}  // namespace logonet::testing
