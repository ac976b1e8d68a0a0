#include "logonet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "logonet/csv.hpp"
#include "logonet/error.hpp"
#include "logonet/image.hpp"

namespace logonet {
namespace fs = std::filesystem;

std::string_view to_string(Subset subset) {
  switch (subset) {
    case Subset::easy: return "easy";
    case Subset::medium: return "medium";
    case Subset::hard: return "hard";
  }
  return "?";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::unassigned: return "";
    case Split::train: return "train";
    case Split::test: return "test";
  }
  return "?";
}

std::string_view to_string(SplitMode mode) {
  return mode == SplitMode::by_sketch ? "by_sketch" : "by_instance";
}

Subset parse_subset(std::string_view text) {
  if (text == "easy") return Subset::easy;
  if (text == "medium") return Subset::medium;
  if (text == "hard") return Subset::hard;
  throw IntegrityError("bad subset tag '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text.empty()) return Split::unassigned;
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  throw IntegrityError("bad split tag '" + std::string(text) + "'");
}

SplitMode parse_split_mode(std::string_view text) {
  if (text == "by_sketch") return SplitMode::by_sketch;
  if (text == "by_instance") return SplitMode::by_instance;
  throw ConfigError("unknown split mode '" + std::string(text) + "'");
}

std::array<std::size_t, 3> DatasetManifest::subset_counts() const {
  std::array<std::size_t, 3> counts{};
  for (const auto& s : sketches) ++counts[static_cast<std::size_t>(s.subset)];
  return counts;
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      sketches.begin(), sketches.end(), [split](const SketchRecord& s) { return s.split == split; }));
}

std::vector<std::size_t> DatasetManifest::sketch_logo_indices() const {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < logos.size(); ++i) index.emplace(logos[i].instance_id, i);
  std::vector<std::size_t> out;
  out.reserve(sketches.size());
  for (const auto& s : sketches) {
    auto it = index.find(s.instance_id);
    if (it == index.end())
      throw IntegrityError("sketch '" + s.sketch_id + "' references unknown instance '" +
                           s.instance_id + "'");
    out.push_back(it->second);
  }
  return out;
}

std::optional<std::size_t> DatasetManifest::logo_index(std::string_view instance_id) const {
  for (std::size_t i = 0; i < logos.size(); ++i)
    if (logos[i].instance_id == instance_id) return i;
  return std::nullopt;
}

DatasetManifest parse_manifest(std::string_view csv, const fs::path& root, bool check_files) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw FormatError("manifest: empty file");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kManifestHeader)
    throw FormatError("manifest: expected header '" + std::string(kManifestHeader) + "', got '" +
                      header + "'");

  DatasetManifest manifest;
  manifest.root = root;
  std::unordered_map<std::string, std::size_t> logo_at;
  std::unordered_set<std::string> sketch_ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 7)
      throw FormatError("manifest row " + std::to_string(r + 1) + ": expected 7 fields, got " +
                        std::to_string(row.size()));
    const std::string& sketch_id = row[0];
    const std::string& instance_id = row[1];
    const std::string& image_path = row[3];
    const std::string where = sketch_id.empty() ? "manifest row " + std::to_string(r + 1)
                                                : "sketch '" + sketch_id + "'";
    if (instance_id.empty()) throw IntegrityError(where + ": empty instance_id");

    if (!image_path.empty()) {
      auto [it, fresh] = logo_at.emplace(instance_id, manifest.logos.size());
      if (fresh) {
        manifest.logos.push_back({instance_id, image_path, std::nullopt});
      } else if (manifest.logos[it->second].image_path != image_path) {
        throw IntegrityError(where + ": instance '" + instance_id + "' has conflicting image paths '" +
                             manifest.logos[it->second].image_path + "' and '" + image_path + "'");
      }
      auto& label = manifest.logos[it->second].text_label;
      if (!row[6].empty() && !label) label = row[6];
    }
    if (sketch_id.empty()) {
      if (image_path.empty()) throw IntegrityError(where + ": logo row without image_path");
      continue;
    }
    if (!sketch_ids.insert(sketch_id).second)
      throw IntegrityError("duplicate sketch_id '" + sketch_id + "'");
    if (row[2].empty()) throw IntegrityError(where + ": empty sketch_path");
    SketchRecord sketch{sketch_id, instance_id, row[2], Subset::easy, Split::unassigned};
    try {
      sketch.subset = parse_subset(row[4]);
      sketch.split = parse_split(row[5]);
    } catch (const IntegrityError& e) {
      throw IntegrityError(where + ": " + e.what());
    }
    manifest.sketches.push_back(std::move(sketch));
  }
  for (const auto& s : manifest.sketches)
    if (!logo_at.count(s.instance_id))
      throw IntegrityError("sketch '" + s.sketch_id + "' references instance '" + s.instance_id +
                           "' which has no logo image");

  if (check_files) {
    for (const auto& logo : manifest.logos)
      if (!fs::exists(root / logo.image_path))
        throw IntegrityError("missing file: " + (root / logo.image_path).string());
    for (const auto& s : manifest.sketches)
      if (!fs::exists(root / s.path))
        throw IntegrityError("sketch '" + s.sketch_id + "': missing file: " +
                             (root / s.path).string());
  }
  return manifest;
}

DatasetManifest load_manifest(const fs::path& root) {
  const fs::path file = root / "manifest.csv";
  if (!fs::exists(file)) throw IntegrityError("missing file: " + file.string());
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IntegrityError("cannot read file: " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), root);
}

std::string manifest_csv(const DatasetManifest& manifest) {
  std::string out(kManifestHeader);
  out += '\n';
  std::unordered_map<std::string_view, std::vector<std::size_t>> by_instance;
  for (std::size_t i = 0; i < manifest.sketches.size(); ++i)
    by_instance[manifest.sketches[i].instance_id].push_back(i);
  for (const auto& logo : manifest.logos) {
    const std::string label = logo.text_label.value_or("");
    auto it = by_instance.find(logo.instance_id);
    if (it == by_instance.end()) {
      out += csv_line({"", logo.instance_id, "", logo.image_path, "", "", label});
      continue;
    }
    for (std::size_t i : it->second) {
      const auto& s = manifest.sketches[i];
      out += csv_line({s.sketch_id, s.instance_id, s.path, logo.image_path,
                       std::string(to_string(s.subset)), std::string(to_string(s.split)), label});
    }
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest) {
  write_text_atomic(manifest.root / "manifest.csv", manifest_csv(manifest));
}

DatasetManifest make_split(const DatasetManifest& manifest, SplitMode mode, double test_fraction,
                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test_fraction must be in (0,1), got " + std::to_string(test_fraction));
  DatasetManifest out = manifest;
  const auto owner = out.sketch_logo_indices();
  std::vector<std::vector<std::size_t>> groups(out.logos.size());
  for (std::size_t i = 0; i < owner.size(); ++i) groups[owner[i]].push_back(i);
  std::mt19937_64 rng(seed);

  std::size_t test_count = 0;
  if (mode == SplitMode::by_sketch) {
    for (auto& group : groups) {
      std::shuffle(group.begin(), group.end(), rng);
      std::size_t n_test = static_cast<std::size_t>(std::lround(test_fraction * group.size()));
      if (!group.empty()) n_test = std::min(n_test, group.size() - 1);
      for (std::size_t k = 0; k < group.size(); ++k)
        out.sketches[group[k]].split = k < n_test ? Split::test : Split::train;
      test_count += n_test;
    }
    if (test_count == 0)
      throw ConfigError("by_sketch split with fraction " + std::to_string(test_fraction) +
                        " leaves the test side empty");
  } else {
    std::vector<std::size_t> instances;
    for (std::size_t l = 0; l < groups.size(); ++l)
      if (!groups[l].empty()) instances.push_back(l);
    std::shuffle(instances.begin(), instances.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * instances.size()));
    if (n_test == 0 || n_test >= instances.size())
      throw ConfigError("by_instance split with fraction " + std::to_string(test_fraction) + " over " +
                        std::to_string(instances.size()) + " instances leaves a side empty");
    for (std::size_t k = 0; k < instances.size(); ++k)
      for (std::size_t i : groups[instances[k]])
        out.sketches[i].split = k < n_test ? Split::test : Split::train;
    test_count = n_test;
  }
  if (out.count(Split::train) == 0) throw ConfigError("split leaves the training side empty");
  return out;
}

DatasetImages load_images(DatasetManifest manifest, std::size_t channels, std::size_t size) {
  DatasetImages images;
  images.sketch_logo = manifest.sketch_logo_indices();
  images.logos.reserve(manifest.logos.size());
  for (const auto& logo : manifest.logos)
    images.logos.push_back(decode_image(manifest.root / logo.image_path, channels, size));
  images.sketches.reserve(manifest.sketches.size());
  for (const auto& s : manifest.sketches)
    images.sketches.push_back(decode_image(manifest.root / s.path, channels, size));
  images.manifest = std::move(manifest);
  return images;
}

}  // namespace logonet
