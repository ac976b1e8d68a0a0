#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logonet/model.hpp"
#include "logonet/retrieval.hpp"

namespace logonet {

/// Checkpoint layout, all integers u32 little-endian:
///   "LGN1", version, config text length, config text (key=value lines),
///   record count, then per parameter in model order:
///   name length, name, ndim, dims..., raw little-endian float32 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Gallery layout:
///   "LGG1", version, fingerprint length, fingerprint, G, D,
///   G x (id length, id), G*D raw little-endian float32 values.
inline constexpr std::uint32_t kGalleryVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const LogoNetModel& model);
LogoNetModel deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const LogoNetModel& model, const std::filesystem::path& path);
LogoNetModel load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_gallery(const Gallery& gallery);
Gallery deserialize_gallery(std::span<const std::uint8_t> bytes);
void save_gallery(const Gallery& gallery, const std::filesystem::path& path);

using WarningSink = std::function<void(const std::string&)>;

/// When `expected_fingerprint` is given and differs from the stored one,
/// `warn` receives a message and the gallery is still returned.
Gallery load_gallery(const std::filesystem::path& path,
                     const std::optional<std::string>& expected_fingerprint = std::nullopt,
                     const WarningSink& warn = {});

}  // namespace logonet
