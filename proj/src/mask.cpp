#include "fetal/mask.hpp"

#include <algorithm>
#include <string>

#include "fetal/errors.hpp"

namespace fetal {

Mask::Mask(std::uint32_t width, std::uint32_t height) : width_(width), height_(height) {
  if (width == 0 || height == 0) throw DimensionError("mask dimensions must be at least 1x1");
}

Mask Mask::from_runs(std::uint32_t width, std::uint32_t height, std::vector<Run> runs) {
  Mask m(width, height);
  const std::uint64_t total = m.pixel_count();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Run& r = runs[i];
    if (r.length == 0) throw ValidationError("mask run " + std::to_string(i) + " has zero length");
    if (r.start + r.length > total) throw ValidationError("mask run " + std::to_string(i) + " exceeds raster");
    if (i > 0) {
      const Run& prev = runs[i - 1];
      // Strictly greater also rules out adjacency: runs must be maximal.
      if (r.start <= prev.start + prev.length)
        throw ValidationError("mask runs must be sorted, disjoint and non-adjacent (run " + std::to_string(i) + ")");
    }
  }
  m.runs_ = std::move(runs);
  return m;
}

Mask Mask::from_raster(const Raster& raster) {
  if (raster.width == 0 || raster.height == 0) throw DimensionError("raster must be at least 1x1");
  if (raster.data.size() != std::size_t{raster.width} * raster.height)
    throw DimensionError("raster buffer does not match its dimensions");
  Mask m(raster.width, raster.height);
  const std::uint64_t n = raster.data.size();
  std::uint64_t i = 0;
  while (i < n) {
    if (raster.data[i] == 0) {
      ++i;
      continue;
    }
    const std::uint64_t start = i;
    while (i < n && raster.data[i] != 0) ++i;
    m.runs_.push_back({start, i - start});
  }
  return m;
}

Mask Mask::from_indices(std::uint32_t width, std::uint32_t height, std::vector<std::uint64_t> indices) {
  Mask m(width, height);
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  for (std::uint64_t idx : indices) {
    if (idx >= m.pixel_count()) throw ValidationError("pixel index outside raster");
    if (!m.runs_.empty() && m.runs_.back().start + m.runs_.back().length == idx) {
      ++m.runs_.back().length;
    } else {
      m.runs_.push_back({idx, 1});
    }
  }
  return m;
}

Raster Mask::to_raster() const {
  Raster r(width_, height_);
  for (const Run& run : runs_)
    std::fill_n(r.data.begin() + static_cast<std::ptrdiff_t>(run.start), run.length, std::uint8_t{1});
  return r;
}

std::vector<RowSegment> Mask::row_segments() const {
  std::vector<RowSegment> out;
  out.reserve(runs_.size());
  for (const Run& run : runs_) {
    std::uint64_t pos = run.start;
    const std::uint64_t end = run.start + run.length;
    while (pos < end) {
      const auto y = static_cast<std::uint32_t>(pos / width_);
      const auto x = static_cast<std::uint32_t>(pos % width_);
      const std::uint64_t row_end = std::uint64_t{y + 1} * width_;
      const std::uint64_t seg_end = std::min(end, row_end);
      out.push_back({y, x, static_cast<std::uint32_t>(x + (seg_end - pos))});
      pos = seg_end;
    }
  }
  return out;
}

std::uint64_t Mask::area() const {
  std::uint64_t a = 0;
  for (const Run& r : runs_) a += r.length;
  return a;
}

bool Mask::contains(std::uint32_t x, std::uint32_t y) const {
  if (x >= width_ || y >= height_) return false;
  const std::uint64_t idx = std::uint64_t{y} * width_ + x;
  auto it = std::upper_bound(runs_.begin(), runs_.end(), idx,
                             [](std::uint64_t v, const Run& r) { return v < r.start; });
  if (it == runs_.begin()) return false;
  --it;
  return idx < it->start + it->length;
}

Mask mask_from_raster(const Raster& raster) { return Mask::from_raster(raster); }
Raster mask_to_raster(const Mask& m) { return m.to_raster(); }
std::uint64_t mask_area(const Mask& m) { return m.area(); }

namespace {

// Merges two run lists, keeping positions whose coverage count satisfies pred.
template <typename Pred>
Mask combine(const Mask& a, const Mask& b, Pred keep) {
  if (!a.same_dims(b)) throw DimensionError("mask dimensions differ");
  std::vector<std::pair<std::uint64_t, int>> events;
  for (const auto& r : a.runs()) {
    events.emplace_back(r.start, +1);
    events.emplace_back(r.start + r.length, -1);
  }
  for (const auto& r : b.runs()) {
    events.emplace_back(r.start, +1);
    events.emplace_back(r.start + r.length, -1);
  }
  std::sort(events.begin(), events.end());
  std::vector<Mask::Run> runs;
  int depth = 0;
  std::size_t i = 0;
  while (i < events.size()) {
    const std::uint64_t pos = events[i].first;
    const bool was = keep(depth);
    while (i < events.size() && events[i].first == pos) depth += events[i++].second;
    const bool now = keep(depth);
    if (!was && now) {
      runs.push_back({pos, 0});
    } else if (was && !now) {
      runs.back().length = pos - runs.back().start;
    }
  }
  return Mask::from_runs(a.width(), a.height(), std::move(runs));
}

}  // namespace

Mask mask_intersection(const Mask& a, const Mask& b) {
  return combine(a, b, [](int d) { return d >= 2; });
}

Mask mask_union(const Mask& a, const Mask& b) {
  return combine(a, b, [](int d) { return d >= 1; });
}

void to_json(nlohmann::json& j, const Mask& m) {
  auto runs = nlohmann::json::array();
  for (const auto& r : m.runs()) runs.push_back({r.start, r.length});
  j = nlohmann::json{{"width", m.width()}, {"height", m.height()}, {"runs", std::move(runs)}};
}

void from_json(const nlohmann::json& j, Mask& m) {
  std::vector<Mask::Run> runs;
  for (const auto& r : j.at("runs")) {
    if (!r.is_array() || r.size() != 2) throw ValidationError("mask run must be [start, length]");
    runs.push_back({r[0].get<std::uint64_t>(), r[1].get<std::uint64_t>()});
  }
  m = Mask::from_runs(j.at("width").get<std::uint32_t>(), j.at("height").get<std::uint32_t>(), std::move(runs));
}

}  // namespace fetal
