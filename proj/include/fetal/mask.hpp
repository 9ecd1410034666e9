#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace fetal {

// Row-major boolean grid, one byte per pixel (0 = background).
struct Raster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> data;

  Raster() = default;
  Raster(std::uint32_t w, std::uint32_t h) : width(w), height(h), data(std::size_t{w} * h, 0) {}

  [[nodiscard]] bool at(std::uint32_t x, std::uint32_t y) const { return data[std::size_t{y} * width + x] != 0; }
  void set(std::uint32_t x, std::uint32_t y, bool v = true) { data[std::size_t{y} * width + x] = v ? 1 : 0; }
  bool operator==(const Raster&) const = default;
};

// A horizontal foreground segment confined to one row, [x_begin, x_end).
struct RowSegment {
  std::uint32_t y;
  std::uint32_t x_begin;
  std::uint32_t x_end;
};

// Run-length encoded binary mask over the row-major flattened raster.
// Runs are sorted, non-overlapping and maximal (never adjacent).
class Mask {
 public:
  struct Run {
    std::uint64_t start = 0;
    std::uint64_t length = 0;
    bool operator==(const Run&) const = default;
  };

  Mask() = default;
  // Empty (all background) mask.
  Mask(std::uint32_t width, std::uint32_t height);

  // Validates the run invariants; throws ValidationError on violation.
  static Mask from_runs(std::uint32_t width, std::uint32_t height, std::vector<Run> runs);
  // Throws DimensionError for an empty grid.
  static Mask from_raster(const Raster& raster);
  // Builds from unsorted, possibly overlapping pixel indices.
  static Mask from_indices(std::uint32_t width, std::uint32_t height, std::vector<std::uint64_t> indices);

  [[nodiscard]] Raster to_raster() const;
  [[nodiscard]] std::vector<RowSegment> row_segments() const;

  [[nodiscard]] std::uint32_t width() const { return width_; }
  [[nodiscard]] std::uint32_t height() const { return height_; }
  [[nodiscard]] std::uint64_t pixel_count() const { return std::uint64_t{width_} * height_; }
  [[nodiscard]] std::span<const Run> runs() const { return runs_; }
  [[nodiscard]] bool empty() const { return runs_.empty(); }
  [[nodiscard]] std::uint64_t area() const;
  [[nodiscard]] bool contains(std::uint32_t x, std::uint32_t y) const;
  [[nodiscard]] bool same_dims(const Mask& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool operator==(const Mask&) const = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<Run> runs_;
};

Mask mask_from_raster(const Raster& raster);
Raster mask_to_raster(const Mask& m);
std::uint64_t mask_area(const Mask& m);

Mask mask_intersection(const Mask& a, const Mask& b);
Mask mask_union(const Mask& a, const Mask& b);

void to_json(nlohmann::json& j, const Mask& m);
void from_json(const nlohmann::json& j, Mask& m);

}  // namespace fetal
