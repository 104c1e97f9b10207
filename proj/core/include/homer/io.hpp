// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homer/image.hpp"

namespace homer::io {

/// 8-bit RGB PNG. Grayscale/alpha/palette inputs are converted to RGB.
RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
RgbImage decode_png(const std::vector<std::uint8_t>& bytes);

/// Masks are stored as 1-bit grayscale PNG (any nonzero sample reads as 1).
BinaryMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);

/// Row-major run lengths alternating zero/one, starting with a (possibly
/// empty) zero run: {"width": W, "height": H, "counts": [...]}
nlohmann::json encode_rle(const BinaryMask& mask);
BinaryMask decode_rle(const nlohmann::json& rle);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; deterministic for equal input.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace homer::io
