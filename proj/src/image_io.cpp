#include "fetal/image_io.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "fetal/errors.hpp"

namespace fetal {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  if (bytes.empty()) return out;
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ImageError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  if (text.empty()) return out;
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw ImageError("malformed base64");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

namespace {

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

ImageSize probe_pgm(std::span<const std::uint8_t> b) {
  std::size_t i = 2;
  std::array<std::uint64_t, 2> dims{};
  for (auto& d : dims) {
    while (i < b.size() && (std::isspace(b[i]) || b[i] == '#')) {
      if (b[i] == '#')
        while (i < b.size() && b[i] != '\n') ++i;
      else
        ++i;
    }
    if (i >= b.size() || !std::isdigit(b[i])) throw ImageError("malformed PGM header");
    while (i < b.size() && std::isdigit(b[i])) {
      d = d * 10 + (b[i++] - '0');
      if (d > 0xffffffffULL) throw ImageError("PGM dimension overflow");
    }
  }
  return {static_cast<std::uint32_t>(dims[0]), static_cast<std::uint32_t>(dims[1])};
}

}  // namespace

ImageSize probe_image(std::span<const std::uint8_t> b) {
  static constexpr std::array<std::uint8_t, 8> kPng{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  ImageSize s;
  if (b.size() >= 24 && std::equal(kPng.begin(), kPng.end(), b.begin())) {
    if (!std::equal(b.begin() + 12, b.begin() + 16, "IHDR")) throw ImageError("PNG lacks IHDR");
    s = {be32(b, 16), be32(b, 20)};
  } else if (b.size() >= 2 && b[0] == 'P' && (b[1] == '5' || b[1] == '2')) {
    s = probe_pgm(b);
  } else {
    throw ImageError("unsupported image format (expected PNG or PGM)");
  }
  if (s.width == 0 || s.height == 0) throw ImageError("image has zero width or height");
  return s;
}

ImageSize probe_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return probe_image(bytes);
  } catch (const ImageError& e) {
    throw ImageError(path.string() + ": " + e.what());
  }
}

}  // namespace fetal
