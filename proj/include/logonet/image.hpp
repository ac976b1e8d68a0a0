#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "logonet/tensor.hpp"

namespace logonet {

/// Decodes an 8-bit PNG or JPEG into [channels, size, size] values in [0,1].
/// One channel uses luminance 0.299 R + 0.587 G + 0.114 B; three channels
/// are R, G, B. Resizing is bilinear. Throws Error naming the path when the
/// file is missing or undecodable.
Tensor<float> decode_image(const std::filesystem::path& path, std::size_t channels, std::size_t size);
Tensor<float> decode_image_bytes(std::span<const std::uint8_t> bytes, std::size_t channels,
                                 std::size_t size);

/// Bilinear resampling of a [C,H,W] tensor with half-pixel centers.
Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t height, std::size_t width);

/// 8-bit PNG of a [1,H,W] or [3,H,W] tensor in [0,1].
std::vector<std::uint8_t> encode_png(const Tensor<float>& image);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes through a temporary file and a rename, so readers never see a
/// partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace logonet
