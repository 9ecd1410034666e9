#include "fetal/summarizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <regex>
#include <set>

#include "fetal/errors.hpp"

#ifndef FETAL_VERSION
#define FETAL_VERSION "0.0.0"
#endif

namespace fetal {

std::string_view engine_version() { return FETAL_VERSION; }

Clock system_clock_utc() {
  return [] {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
  };
}

Clock fixed_clock(std::string timestamp) {
  return [t = std::move(timestamp)] { return t; };
}

std::string_view to_string(ReportKind k) { return k == ReportKind::ImageCaption ? "image_caption" : "video_summary"; }

const ReportSection* Report::section(std::string_view heading) const {
  for (const auto& s : sections)
    if (s.heading == heading) return &s;
  return nullptr;
}

bool Report::has_flag(std::string_view flag) const { return std::find(flags.begin(), flags.end(), flag) != flags.end(); }

void Report::validate() const {
  if (sections.empty()) throw ValidationError("report has no sections");
  for (const auto& s : sections)
    if (s.heading.empty()) throw ValidationError("report section without heading");
}

void to_json(nlohmann::json& j, const Report& r) {
  auto sections = nlohmann::json::array();
  for (const auto& s : r.sections)
    sections.push_back({{"heading", s.heading}, {"body", s.body}, {"payload", s.payload}});
  j = nlohmann::json{{"schema_version", r.schema_version}, {"kind", to_string(r.kind)},
                     {"sections", sections},           {"flags", r.flags},
                     {"generated_at", r.generated_at}, {"engine_version", r.engine_version}};
}

void from_json(const nlohmann::json& j, Report& r) {
  r = Report{};
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kReportSchemaVersion)
    throw ValidationError("unsupported report schema_version " + std::to_string(r.schema_version));
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "image_caption") r.kind = ReportKind::ImageCaption;
  else if (kind == "video_summary") r.kind = ReportKind::VideoSummary;
  else throw ValidationError("unknown report kind '" + kind + "'");
  for (const auto& s : j.at("sections"))
    r.sections.push_back({s.at("heading").get<std::string>(), s.at("body").get<std::string>(), s.at("payload")});
  r.flags = j.at("flags").get<std::vector<std::string>>();
  r.generated_at = j.at("generated_at").get<std::string>();
  r.engine_version = j.at("engine_version").get<std::string>();
  r.validate();
}

double ga_tolerance(double ga_weeks, const SummarizerConfig& cfg) {
  if (cfg.ga_tolerance_weeks) return *cfg.ga_tolerance_weeks;
  return ga_weeks < 14.0 ? 1.0 : 2.0;
}

double round_to(double v, double step) {
  const int digits = step >= 1 ? 0 : static_cast<int>(std::ceil(-std::log10(step) - 1e-9));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, std::round(v / step) * step);
  return std::stod(buf);
}

namespace {

std::string num(const nlohmann::json& v) { return canonical_json(v); }
double r2(double v) { return round_to(v, 0.01); }
double r1(double v) { return round_to(v, 0.1); }

std::string words(TaskType t) {
  std::string s(to_string(t));
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

// Display name of a measure key: HC, AC, GA, AoP.
std::string measure_label(std::string_view s) {
  if (s == "aop") return "AoP";
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::string join(const std::vector<std::string>& v, std::string_view sep = ", ") {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : std::string(sep)) + s;
  return out;
}

std::string note(const FindingsBundle& b, const std::string& key) {
  auto it = b.annotations.find(key);
  return it == b.annotations.end() ? std::string() : it->second;
}

ReportSection plane_section(const FindingsBundle& b) {
  nlohmann::json p{{"plane", nullptr}, {"confidence", nullptr}, {"subplane", nullptr}, {"subplane_confidence", nullptr}};
  std::string body;
  if (!b.plane) {
    body = "Standard plane: not assessed.";
  } else {
    p["plane"] = to_string(*b.plane);
    p["confidence"] = r2(b.plane_confidence);
    body = "Standard plane: " + std::string(to_string(*b.plane)) + " (confidence " + num(p["confidence"]) + ").";
    if (b.subplane) {
      p["subplane"] = to_string(*b.subplane);
      double sc = b.plane_confidence;
      for (const auto& f : b.fused)
        if (f.task == TaskType::BrainSubplaneClassification)
          if (const auto* cd = std::get_if<ClassDistribution>(&f.payload)) sc = cd->prob(*b.subplane);
      p["subplane_confidence"] = r2(sc);
      body += " Brain sub-plane: " + std::string(to_string(*b.subplane)) + " (confidence " +
              num(p["subplane_confidence"]) + ").";
    }
  }
  return {"Plane", body, p};
}

ReportSection findings_section(const FindingsBundle& b) {
  auto items = nlohmann::json::array();
  std::string body;
  for (const auto& f : b.fused) {
    const auto* m = std::get_if<Mask>(&f.payload);
    if (!m) continue;
    const auto area = static_cast<std::int64_t>(m->area());
    items.push_back({{"task", to_string(f.task)},
                     {"area_px", area},
                     {"contributors", f.contributors},
                     {"fusion_rule", f.fusion_rule}});
    body += "- " + words(f.task) + ": " + (area == 0 ? std::string("empty mask") : num(area) + " px foreground") + " (" +
            f.fusion_rule + " of " + join(f.contributors) + ")\n";
  }
  if (items.empty()) body = "Segmentation findings: not assessed.";
  else body.pop_back();
  return {"Findings", body, {{"items", items}}};
}

struct GaInfo {
  std::optional<double> ga;
  std::optional<double> hc_implied;
};

ReportSection biometry_section(const FindingsBundle& b, const ChartSet& charts, const std::optional<double>& ga,
                               std::vector<std::string>& flags) {
  auto items = nlohmann::json::array();
  std::string body;
  for (const TaskType task : {TaskType::HCMeasurement, TaskType::ACMeasurement, TaskType::AoP}) {
    const FusedResult* f = b.find(task);
    if (!f) continue;
    const auto& v = std::get<BiometryValue>(f->payload);
    const std::string key(to_string(v.measure));
    nlohmann::json item{{"measure", key},
                        {"value", r2(v.value)},
                        {"unit", to_string(v.unit)},
                        {"method", v.method},
                        {"confidence", r2(v.confidence)},
                        {"contributors", f->contributors},
                        {"fusion_rule", f->fusion_rule},
                        {"percentile", nullptr},
                        {"in_band", nullptr},
                        {"ga_weeks", nullptr},
                        {"band", nullptr}};
    std::string line = "- " + measure_label(key) + ": " + num(item["value"]) + " " + std::string(to_string(v.unit));
    if (note(b, key + ".replaced_by_reflection") == "true") {
      const double original = std::stod(note(b, key + ".original_value"));
      item["reflection"] = {{"original_value", r2(original)}, {"excluded_tools", note(b, key + ".excluded_tools")}};
      line += " (replaced by reflection; original " + num(item["reflection"]["original_value"]) + ", excluded " +
              note(b, key + ".excluded_tools") + ")";
      flags.push_back(key + ".replaced_by_reflection");
    }
    if (note(b, key + ".out_of_band") == "true") flags.push_back(key + ".out_of_band");
    if (v.measure == Measure::HC || v.measure == Measure::AC) {
      const auto chart = charts.find(v.measure);
      if (v.unit != Unit::Millimeters) {
        item["status"] = "uncalibrated";
        line += ", percentile not assessed (no pixel spacing)";
        flags.push_back(key + ".uncalibrated");
      } else if (chart == charts.end() || !ga || !chart->second.covers(*ga)) {
        item["status"] = "unvalidated";
        line += ", percentile not assessed (no growth chart or GA estimate)";
        flags.push_back(key + ".unvalidated");
      } else {
        const auto pr = percentile_of(chart->second, *ga, v.value);
        item["status"] = "validated";
        item["percentile"] = r1(pr.percentile);
        item["in_band"] = pr.in_band_2_5_97_5;
        item["ga_weeks"] = r2(*ga);
        item["band"] = nlohmann::json::array({2.5, 97.5});
        line += ", percentile " + num(item["percentile"]) + " at GA " + num(item["ga_weeks"]) + " weeks, " +
                (pr.in_band_2_5_97_5 ? "within" : "outside") + " the 2.5-97.5 percentile band";
        if (!pr.in_band_2_5_97_5) flags.push_back(key + ".outside_validity_band");
      }
    }
    items.push_back(item);
    body += line + ".\n";
  }
  if (items.empty()) body = "Biometry: not assessed.";
  else body.pop_back();
  return {"Biometry", body, {{"items", items}}};
}

ReportSection ga_section(const FindingsBundle& b, const GaInfo& g) {
  nlohmann::json p{{"ga_weeks", nullptr}, {"hc_implied_ga_weeks", nullptr}};
  std::string body;
  if (const auto v = b.biometry(TaskType::GAEstimation)) {
    const FusedResult* f = b.find(TaskType::GAEstimation);
    p["ga_weeks"] = r2(v->value);
    p["confidence"] = r2(v->confidence);
    p["method"] = v->method;
    p["contributors"] = f->contributors;
    body = "Estimated GA: " + num(p["ga_weeks"]) + " weeks (confidence " + num(p["confidence"]) + ").";
  } else {
    body = "Estimated GA: not assessed.";
  }
  if (g.hc_implied) {
    p["hc_implied_ga_weeks"] = r2(*g.hc_implied);
    body += " HC-implied GA: " + num(p["hc_implied_ga_weeks"]) + " weeks.";
  }
  return {"GA", body, p};
}

ReportSection consistency_section(const GaInfo& g, const SummarizerConfig& cfg, std::vector<std::string>& flags) {
  nlohmann::json p{{"hc_ga_delta_weeks", nullptr}, {"tolerance_weeks", nullptr}, {"consistent", nullptr}};
  std::string body;
  if (g.ga && g.hc_implied) {
    const double delta = std::abs(*g.hc_implied - *g.ga);
    const double tol = ga_tolerance(*g.ga, cfg);
    const bool ok = delta <= tol;
    p["hc_ga_delta_weeks"] = r2(delta);
    p["tolerance_weeks"] = r2(tol);
    p["consistent"] = ok;
    body = "HC-implied and estimated GA differ by " + num(p["hc_ga_delta_weeks"]) + " weeks (tolerance " +
           num(p["tolerance_weeks"]) + "): " + (ok ? "consistent." : "inconsistent.");
    if (!ok) flags.push_back("ga.hc_discrepancy");
  } else {
    body = "GA cross-reference: not assessed.";
  }
  p["flags"] = flags;
  body += "\nFlags: " + (flags.empty() ? std::string("none") : join(flags)) + ".";
  return {"Consistency", body, p};
}

ReportSection audit_section(const FindingsBundle& b) {
  auto tools = nlohmann::json::array();
  std::string body;
  for (const auto& r : b.per_tool) {
    nlohmann::json t{{"tool_id", r.tool_id}, {"task", to_string(r.task)}, {"status", r.ok() ? "ok" : "error"}};
    std::string line = "- " + std::string(to_string(r.task)) + " / " + r.tool_id + ": ";
    if (r.ok()) {
      t["confidence"] = r2(r.confidence);
      line += "ok (confidence " + num(t["confidence"]) + ")";
    } else {
      t["error"] = r.status.message;
      line += "error (" + r.status.message + ")";
    }
    tools.push_back(t);
    body += line + "\n";
  }
  auto fused = nlohmann::json::array();
  for (const auto& f : b.fused)
    fused.push_back({{"task", to_string(f.task)}, {"fusion_rule", f.fusion_rule}, {"contributors", f.contributors}});
  if (tools.empty()) body = "No tools were invoked.";
  else body.pop_back();
  return {"Audit", body, {{"tools", tools}, {"fused", fused}}};
}

}  // namespace

std::vector<ReportSection> caption_sections(const FindingsBundle& bundle, const ChartSet& charts,
                                            const SummarizerConfig& cfg, std::vector<std::string>& flags) {
  GaInfo g;
  if (const auto ga = bundle.biometry(TaskType::GAEstimation)) g.ga = ga->value;
  if (const auto hc = bundle.biometry(TaskType::HCMeasurement); hc && hc->unit == Unit::Millimeters)
    if (const auto chart = charts.find(Measure::HC); chart != charts.end())
      g.hc_implied = chart->second.ga_for_median(hc->value);
  std::vector<ReportSection> out;
  out.push_back(plane_section(bundle));
  out.push_back(findings_section(bundle));
  out.push_back(biometry_section(bundle, charts, g.ga, flags));
  out.push_back(ga_section(bundle, g));
  out.push_back(consistency_section(g, cfg, flags));
  out.push_back(audit_section(bundle));
  return out;
}

Report synthesize_caption(const FindingsBundle& bundle, const ChartSet& charts, const SummarizerConfig& cfg,
                          const Clock& clock) {
  const FindingsBundle checked = reflection_safeguard(bundle, charts, cfg.reflection);
  Report r;
  r.kind = ReportKind::ImageCaption;
  r.sections = caption_sections(checked, charts, cfg, r.flags);
  r.generated_at = clock();
  r.engine_version = std::string(engine_version());
  return r;
}

std::string render(const Report& report, ReportFormat format) {
  if (format == ReportFormat::Json) return canonical_json(nlohmann::json(report)) + "\n";
  std::string md = "# Fetal ultrasound report (" + std::string(to_string(report.kind)) + ")\n\n";
  md += "- Generated at: " + report.generated_at + "\n";
  md += "- Engine version: " + report.engine_version + "\n";
  md += "- Schema version: " + std::to_string(report.schema_version) + "\n";
  for (const auto& s : report.sections) md += "\n## " + s.heading + "\n\n" + s.body + "\n";
  return md;
}

std::vector<std::string> harvest_numbers(std::string_view text) {
  static const std::regex re(R"(\d+(?:\.\d+)?)");
  std::vector<std::string> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it)
    out.push_back(it->str());
  return out;
}

namespace {

void collect(const nlohmann::json& j, std::vector<double>& numbers, std::set<std::string>& tokens) {
  if (j.is_number()) {
    numbers.push_back(j.get<double>());
  } else if (j.is_string()) {
    for (auto& t : harvest_numbers(j.get<std::string>())) tokens.insert(t);
  } else if (j.is_structured()) {
    for (const auto& v : j) collect(v, numbers, tokens);
  }
}

}  // namespace

std::vector<std::string> untraceable_numbers(const Report& report) {
  std::vector<std::string> out;
  for (const auto& s : report.sections) {
    std::vector<double> numbers;
    std::set<std::string> tokens;
    collect(s.payload, numbers, tokens);
    for (const auto& t : harvest_numbers(s.body)) {
      const double v = std::stod(t);
      if (!tokens.contains(t) && std::find(numbers.begin(), numbers.end(), v) == numbers.end())
        out.push_back(s.heading + ": " + t);
    }
  }
  return out;
}

Report polish(Report report, const PolishFn& rewrite) {
  bool rejected = false;
  for (auto& s : report.sections) {
    std::string candidate = rewrite(s);
    const auto before = harvest_numbers(s.body), after = harvest_numbers(candidate);
    std::vector<double> a, b;
    for (const auto& t : before) a.push_back(std::stod(t));
    for (const auto& t : after) b.push_back(std::stod(t));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a == b && !candidate.empty()) s.body = std::move(candidate);
    else rejected = true;
  }
  if (rejected && !report.has_flag("polish.rejected")) report.flags.push_back("polish.rejected");
  return report;
}

}  // namespace fetal
