#pragma once

#include <array>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <vector>

#include "fetal/domain.hpp"
#include "fetal/findings.hpp"

namespace fetal {

inline constexpr std::array<double, 9> kChartPercentiles{2.5, 5, 10, 25, 50, 75, 90, 95, 97.5};
inline constexpr std::size_t kP50Index = 4;

struct ChartRow {
  double ga_weeks = 0.0;
  std::array<double, 9> curves{};
};

class GrowthChart {
 public:
  // Validates ordering invariants; throws ChartError.
  GrowthChart(Measure measure, std::vector<ChartRow> rows);

  [[nodiscard]] Measure measure() const { return measure_; }
  [[nodiscard]] const std::vector<ChartRow>& rows() const { return rows_; }
  [[nodiscard]] double min_ga() const { return rows_.front().ga_weeks; }
  [[nodiscard]] double max_ga() const { return rows_.back().ga_weeks; }
  [[nodiscard]] bool covers(double ga) const { return ga >= min_ga() && ga <= max_ga(); }

  // Every percentile curve linearly interpolated at ga. Throws RangeError
  // outside the tabulated range.
  [[nodiscard]] std::array<double, 9> curves_at(double ga) const;
  [[nodiscard]] double p50_at(double ga) const { return curves_at(ga)[kP50Index]; }
  // Gestational age at which the median curve reaches value, if it does.
  [[nodiscard]] std::optional<double> ga_for_median(double value) const;

 private:
  Measure measure_;
  std::vector<ChartRow> rows_;
};

// CSV with header ga_weeks,p2.5,p5,p10,p25,p50,p75,p90,p95,p97.5. Lines
// starting with '#' are comments. Errors name the offending line.
GrowthChart load_chart(std::istream& in, Measure measure);
GrowthChart load_chart(const std::filesystem::path& path, Measure measure);

struct PercentileResult {
  double percentile = 50.0;
  bool in_band_2_5_97_5 = true;
  bool clamped = false;
  // Same scale as percentile but without the 0.1 / 99.9 caps; used to rank
  // how extreme a value is.
  double unclamped = 50.0;
};

PercentileResult percentile_of(const GrowthChart& chart, double ga_weeks, double value);

// True iff value sits inside the closed 2.5th-97.5th band at ga.
bool validity_check(const GrowthChart& chart, double predicted_ga, double true_hc);

using ChartSet = std::map<Measure, GrowthChart>;

struct ReflectionConfig {
  double lower_percentile = 0.5;
  double upper_percentile = 99.5;
};

// Re-fuses HC/AC measurements whose percentile falls outside the trigger
// band, dropping the most extreme contributor(s). Annotates the bundle with
// "<measure>.*" keys; runs at most once per measurement.
FindingsBundle reflection_safeguard(FindingsBundle findings, const ChartSet& charts, const ReflectionConfig& cfg = {});

}  // namespace fetal
