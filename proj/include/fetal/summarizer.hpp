#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fetal/findings.hpp"
#include "fetal/growth_charts.hpp"

namespace fetal {

inline constexpr int kReportSchemaVersion = 1;
std::string_view engine_version();

// Timestamp source for reports, injectable for reproducible output.
using Clock = std::function<std::string()>;
// ISO 8601 UTC, seconds resolution.
Clock system_clock_utc();
Clock fixed_clock(std::string timestamp);

enum class ReportKind { ImageCaption, VideoSummary };
std::string_view to_string(ReportKind k);

struct ReportSection {
  std::string heading;
  std::string body;
  nlohmann::json payload;
  bool operator==(const ReportSection&) const = default;
};

struct Report {
  int schema_version = kReportSchemaVersion;
  ReportKind kind = ReportKind::ImageCaption;
  std::vector<ReportSection> sections;
  std::vector<std::string> flags;
  std::string generated_at;
  std::string engine_version;

  [[nodiscard]] const ReportSection* section(std::string_view heading) const;
  [[nodiscard]] bool has_flag(std::string_view flag) const;
  void validate() const;
  bool operator==(const Report&) const = default;
};

void to_json(nlohmann::json& j, const Report& r);
void from_json(const nlohmann::json& j, Report& r);

struct SummarizerConfig {
  ReflectionConfig reflection;
  // Fixed GA tolerance in weeks; unset uses 1 week below 14 weeks, else 2.
  std::optional<double> ga_tolerance_weeks;
};

double ga_tolerance(double ga_weeks, const SummarizerConfig& cfg);

// Values shown in reports: biometry and GA to 0.01, percentiles to 0.1,
// confidences to 0.01.
double round_to(double v, double step);

// Report sections after the safeguard has run on `bundle`; flags are
// appended to `flags`. Shared by image and per-keyframe video reports.
std::vector<ReportSection> caption_sections(const FindingsBundle& bundle, const ChartSet& charts,
                                            const SummarizerConfig& cfg, std::vector<std::string>& flags);

// Applies the reflection safeguard, then renders the sections
// Plane, Findings, Biometry, GA, Consistency, Audit.
Report synthesize_caption(const FindingsBundle& bundle, const ChartSet& charts, const SummarizerConfig& cfg,
                          const Clock& clock);

enum class ReportFormat { Json, Markdown };
std::string render(const Report& report, ReportFormat format);

// Numeric tokens in text, in order of appearance.
std::vector<std::string> harvest_numbers(std::string_view text);
// "<heading>: <token>" for every numeral in a section body that matches no
// number (or numeral inside a string) of that section's payload.
std::vector<std::string> untraceable_numbers(const Report& report);

// Optional prose rewrite of each section body. A rewrite whose numerals
// differ from the original is discarded and flagged "polish.rejected".
using PolishFn = std::function<std::string(const ReportSection&)>;
Report polish(Report report, const PolishFn& rewrite);

}  // namespace fetal
