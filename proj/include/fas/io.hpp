#ifndef FAS_IO_HPP_
#define FAS_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fas/core.hpp"

namespace fas::io {

std::vector<std::uint8_t> encode_png(const ColorImage& image);
ColorImage decode_png(std::span<const std::uint8_t> bytes);

void write_png(const ColorImage& image, const std::filesystem::path& path);
ColorImage read_png(const std::filesystem::path& path);

/// Depth stored as 16-bit grayscale, value = round(depth * 65535).
void write_depth_png(const FloatPlane& depth, const std::filesystem::path& path);
FloatPlane read_depth_png(const std::filesystem::path& path);

void write_mask_png(const Bitmap& mask, const std::filesystem::path& path);
Bitmap read_mask_png(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Landmark files: {"points": [[x, y], ...], "regions": {"nose": [i, ...]}}
std::string landmarks_to_json(const LandmarkSet& landmarks);
LandmarkSet landmarks_from_json(std::string_view text);
void write_landmarks(const LandmarkSet& landmarks, const std::filesystem::path& path);
LandmarkSet read_landmarks(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace fas::io

#endif  // FAS_IO_HPP_
