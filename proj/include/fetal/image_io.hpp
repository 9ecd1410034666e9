#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fetal {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws ImageError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

struct ImageSize {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

// Dimensions from a PNG IHDR chunk or a binary/ASCII PGM header.
ImageSize probe_image(std::span<const std::uint8_t> bytes);
ImageSize probe_image(const std::filesystem::path& path);

}  // namespace fetal
