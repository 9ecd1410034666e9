#include "fetal/growth_charts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "fetal/errors.hpp"
#include "fetal/fusion.hpp"

namespace fetal {

GrowthChart::GrowthChart(Measure measure, std::vector<ChartRow> rows) : measure_(measure), rows_(std::move(rows)) {
  if (rows_.empty()) throw ChartError("growth chart has no rows");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (!std::isfinite(r.ga_weeks)) throw ChartError("row " + std::to_string(i + 1) + ": non-finite GA");
    if (i > 0 && !(r.ga_weeks > rows_[i - 1].ga_weeks))
      throw ChartError("row " + std::to_string(i + 1) + ": ga_weeks must be strictly increasing");
    for (std::size_t k = 0; k < r.curves.size(); ++k) {
      if (!(r.curves[k] > 0) || !std::isfinite(r.curves[k]))
        throw ChartError("row " + std::to_string(i + 1) + ": percentile values must be positive");
      if (k > 0 && !(r.curves[k] > r.curves[k - 1]))
        throw ChartError("row " + std::to_string(i + 1) + ": percentile values must be strictly increasing");
    }
  }
}

std::array<double, 9> GrowthChart::curves_at(double ga) const {
  if (!covers(ga))
    throw RangeError("GA " + std::to_string(ga) + " weeks outside chart range [" + std::to_string(min_ga()) + ", " +
                     std::to_string(max_ga()) + "]");
  auto hi = std::lower_bound(rows_.begin(), rows_.end(), ga,
                             [](const ChartRow& r, double g) { return r.ga_weeks < g; });
  if (hi->ga_weeks == ga) return hi->curves;
  auto lo = hi - 1;
  const double t = (ga - lo->ga_weeks) / (hi->ga_weeks - lo->ga_weeks);
  std::array<double, 9> out{};
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (1.0 - t) * lo->curves[k] + t * hi->curves[k];
  return out;
}

std::optional<double> GrowthChart::ga_for_median(double value) const {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const double v = rows_[i].curves[kP50Index];
    if (v == value) return rows_[i].ga_weeks;
    if (i == 0) continue;
    const double u = rows_[i - 1].curves[kP50Index];
    if ((u < value && value < v) || (v < value && value < u)) {
      const double t = (value - u) / (v - u);
      return rows_[i - 1].ga_weeks + t * (rows_[i].ga_weeks - rows_[i - 1].ga_weeks);
    }
  }
  return std::nullopt;
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

GrowthChart load_chart(std::istream& in, Measure measure) {
  static const std::vector<std::string> kHeader{"ga_weeks", "p2.5", "p5",  "p10",  "p25",
                                                "p50",      "p75",  "p90", "p95", "p97.5"};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<ChartRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split_csv(line);
    if (!have_header) {
      for (const auto& col : kHeader)
        if (std::find(cells.begin(), cells.end(), col) == cells.end())
          throw ChartError("line " + std::to_string(line_no) + ": missing column '" + col + "'");
      if (cells != kHeader) throw ChartError("line " + std::to_string(line_no) + ": columns must be ga_weeks,p2.5,...,p97.5 in order");
      have_header = true;
      continue;
    }
    if (cells.size() != kHeader.size())
      throw ChartError("line " + std::to_string(line_no) + ": expected " + std::to_string(kHeader.size()) + " columns");
    ChartRow row;
    try {
      std::size_t used = 0;
      row.ga_weeks = std::stod(cells[0], &used);
      if (used != cells[0].size()) throw std::invalid_argument("trailing");
      for (std::size_t k = 0; k < 9; ++k) {
        row.curves[k] = std::stod(cells[k + 1], &used);
        if (used != cells[k + 1].size()) throw std::invalid_argument("trailing");
      }
    } catch (const std::logic_error&) {
      throw ChartError("line " + std::to_string(line_no) + ": non-numeric value");
    }
    if (!rows.empty() && !(row.ga_weeks > rows.back().ga_weeks))
      throw ChartError("line " + std::to_string(line_no) + ": ga_weeks not strictly increasing (duplicate or unsorted)");
    for (std::size_t k = 1; k < 9; ++k)
      if (!(row.curves[k] > row.curves[k - 1]))
        throw ChartError("line " + std::to_string(line_no) + ": " + kHeader[k + 1] + " not above " + kHeader[k]);
    rows.push_back(row);
  }
  if (!have_header) throw ChartError("chart has no header line");
  try {
    return GrowthChart(measure, std::move(rows));
  } catch (const ChartError& e) {
    throw ChartError(std::string("chart: ") + e.what());
  }
}

GrowthChart load_chart(const std::filesystem::path& path, Measure measure) {
  std::ifstream in(path);
  if (!in) throw ChartError("cannot open chart '" + path.string() + "'");
  try {
    return load_chart(in, measure);
  } catch (const ChartError& e) {
    throw ChartError(path.string() + ": " + e.what());
  }
}

PercentileResult percentile_of(const GrowthChart& chart, double ga_weeks, double value) {
  if (!(value > 0) || !std::isfinite(value)) throw ValidationError("measurement must be positive");
  const auto c = chart.curves_at(ga_weeks);
  PercentileResult r;
  if (value < c.front()) {
    r.unclamped = 2.5 * (value / c.front());
    r.percentile = std::max(0.1, r.unclamped);
    r.in_band_2_5_97_5 = false;
    r.clamped = true;
    return r;
  }
  if (value > c.back()) {
    // Mirror of the lower tail: linear in the relative excess over the 97.5th curve.
    r.unclamped = 100.0 - 2.5 * (2.0 - value / c.back());
    r.percentile = std::min(99.9, r.unclamped);
    r.in_band_2_5_97_5 = false;
    r.clamped = true;
    return r;
  }
  std::size_t k = 0;
  while (k + 1 < c.size() && value > c[k + 1]) ++k;
  if (k + 1 == c.size()) {
    r.percentile = kChartPercentiles.back();
  } else {
    const double frac = (value - c[k]) / (c[k + 1] - c[k]);
    r.percentile = kChartPercentiles[k] + (kChartPercentiles[k + 1] - kChartPercentiles[k]) * frac;
  }
  r.unclamped = r.percentile;
  r.in_band_2_5_97_5 = true;
  r.clamped = false;
  return r;
}

bool validity_check(const GrowthChart& chart, double predicted_ga, double true_hc) {
  return percentile_of(chart, predicted_ga, true_hc).in_band_2_5_97_5;
}

namespace {

std::string number_text(double v) { return canonical_json(nlohmann::json(v)); }

}  // namespace

FindingsBundle reflection_safeguard(FindingsBundle findings, const ChartSet& charts, const ReflectionConfig& cfg) {
  const auto ga = findings.biometry(TaskType::GAEstimation);
  for (const TaskType task : {TaskType::HCMeasurement, TaskType::ACMeasurement}) {
    FusedResult* fused = findings.find(task);
    if (!fused) continue;
    const Measure measure = *measure_of(task);
    const std::string key(to_string(measure));
    auto& notes = findings.annotations;
    if (notes.contains(key + ".reflection_applied")) continue;

    const auto& value = std::get<BiometryValue>(fused->payload);
    if (value.unit != Unit::Millimeters) {
      notes[key + ".validation"] = "uncalibrated";
      continue;
    }
    auto chart_it = charts.find(measure);
    if (chart_it == charts.end() || !ga || !chart_it->second.covers(ga->value)) {
      notes[key + ".validation"] = "unvalidated";
      continue;
    }
    const GrowthChart& chart = chart_it->second;
    const double p = percentile_of(chart, ga->value, value.value).percentile;
    notes[key + ".validation"] = "validated";
    if (p >= cfg.lower_percentile && p <= cfg.upper_percentile) continue;

    notes[key + ".reflection_applied"] = "true";
    std::vector<ExpertResult> candidates;
    for (const auto& r : findings.tool_results(task)) {
      if (!r.ok() || !r.payload) continue;
      const auto* b = std::get_if<BiometryValue>(&*r.payload);
      if (!b || b->unit != value.unit) continue;
      if (std::find(fused->contributors.begin(), fused->contributors.end(), r.tool_id) == fused->contributors.end())
        continue;
      candidates.push_back(r);
    }
    std::vector<double> extremeness;
    double worst = -1;
    for (const auto& r : candidates) {
      const double u = percentile_of(chart, ga->value, std::get<BiometryValue>(*r.payload).value).unclamped;
      extremeness.push_back(std::abs(u - 50.0));
      worst = std::max(worst, extremeness.back());
    }
    std::vector<ExpertResult> kept;
    std::vector<std::string> excluded;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (std::abs(extremeness[i] - worst) <= 1e-12) excluded.push_back(candidates[i].tool_id);
      else kept.push_back(candidates[i]);
    }
    if (kept.empty()) {
      notes[key + ".out_of_band"] = "true";
      continue;
    }
    FusedResult refused = fuse_scalars(kept);
    const double q = percentile_of(chart, ga->value, std::get<BiometryValue>(refused.payload).value).percentile;
    if (q < cfg.lower_percentile || q > cfg.upper_percentile) {
      notes[key + ".out_of_band"] = "true";
      continue;
    }
    std::sort(excluded.begin(), excluded.end());
    std::string excluded_list;
    for (const auto& id : excluded) excluded_list += (excluded_list.empty() ? "" : ",") + id;
    notes[key + ".replaced_by_reflection"] = "true";
    notes[key + ".original_value"] = number_text(value.value);
    notes[key + ".reflected_value"] = number_text(std::get<BiometryValue>(refused.payload).value);
    notes[key + ".excluded_tools"] = excluded_list;
    *fused = std::move(refused);
  }
  return findings;
}

}  // namespace fetal
