#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "logonet/tensor.hpp"

namespace logonet {

enum class Subset { easy, medium, hard };
enum class Split { unassigned, train, test };
enum class SplitMode { by_sketch, by_instance };

std::string_view to_string(Subset subset);
std::string_view to_string(Split split);
std::string_view to_string(SplitMode mode);
Subset parse_subset(std::string_view text);
Split parse_split(std::string_view text);
SplitMode parse_split_mode(std::string_view text);

struct LogoRecord {
  std::string instance_id;
  std::string image_path;  // relative to the dataset root
  std::optional<std::string> text_label;
};

struct SketchRecord {
  std::string sketch_id;
  std::string instance_id;
  std::string path;  // relative to the dataset root
  Subset subset = Subset::easy;
  Split split = Split::unassigned;
};

/// Layout on disk:
///   root/images/<instance_id>.png
///   root/sketches/<sketch_id>.png
///   root/manifest.csv with header
///     sketch_id,instance_id,sketch_path,image_path,subset,split,text_label
/// A row with an empty sketch_id declares a gallery logo without sketches.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<LogoRecord> logos;
  std::vector<SketchRecord> sketches;

  std::array<std::size_t, 3> subset_counts() const;
  std::size_t count(Split split) const;
  /// Position in `logos` of each sketch's instance.
  std::vector<std::size_t> sketch_logo_indices() const;
  std::optional<std::size_t> logo_index(std::string_view instance_id) const;
};

inline constexpr std::string_view kManifestHeader =
    "sketch_id,instance_id,sketch_path,image_path,subset,split,text_label";

/// Parses and validates root/manifest.csv, checking that every referenced
/// file exists. Throws IntegrityError or FormatError.
DatasetManifest load_manifest(const std::filesystem::path& root);
DatasetManifest parse_manifest(std::string_view csv, const std::filesystem::path& root,
                               bool check_files = true);
std::string manifest_csv(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest);

/// by_sketch: each instance sends round(test_fraction * n) of its n sketches
/// to test, capped at n - 1 so every instance keeps a training sketch.
/// by_instance: round(test_fraction * instances) whole instances go to test.
/// Throws ConfigError when either side would be empty.
DatasetManifest make_split(const DatasetManifest& manifest, SplitMode mode, double test_fraction,
                           std::uint64_t seed);

/// Decoded tensors aligned with a manifest's records.
struct DatasetImages {
  DatasetManifest manifest;
  std::vector<Tensor<float>> logos;     // [C,S,S]
  std::vector<Tensor<float>> sketches;  // [C,S,S]
  std::vector<std::size_t> sketch_logo;
};

DatasetImages load_images(DatasetManifest manifest, std::size_t channels, std::size_t size);

struct SynthOptions {
  std::size_t instances = 20;
  std::size_t sketches_per_instance = 4;
  std::size_t size = 64;
  std::uint64_t seed = 42;
};

/// Writes a synthetic dataset in the layout above. Each instance is 2-4
/// strokes (circle, bar, triangle, arc) drawn dark on white; each sketch
/// redraws them with endpoint jitter, thickness variation and stroke
/// dropout by subset (easy 0, medium 0.1, hard 0.3). Sketch j of an
/// instance gets subset j % 3. Splits are left unassigned.
DatasetManifest synth_generate(const SynthOptions& options, const std::filesystem::path& root);

}  // namespace logonet
