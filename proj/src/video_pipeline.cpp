#include "fetal/video_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fetal/errors.hpp"
#include "fetal/fusion.hpp"
#include "parallel.hpp"

namespace fetal {

namespace {

std::string num(const nlohmann::json& v) { return canonical_json(v); }
double r2(double v) { return round_to(v, 0.01); }
double r1(double v) { return round_to(v, 0.1); }

std::string join(const std::vector<std::string>& v, std::string_view sep = ", ") {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : std::string(sep)) + s;
  return out;
}

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

std::string frame_tag(std::size_t i) { return "frame_" + std::to_string(i); }

}  // namespace

FrameScoring score_frames(const VideoStream& v, const ExpertSpec& scorer, ToolClient& client, std::size_t stride,
                          const std::string& request_base, std::size_t parallelism) {
  if (stride < 1) throw ValidationError("frame stride must be >= 1");
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < v.frames.size(); i += stride) indices.push_back(i);
  std::vector<std::optional<FrameScore>> scores(indices.size());
  std::vector<std::vector<ExpertResult>> results(indices.size());
  detail::parallel_for(indices.size(), parallelism, [&](std::size_t k) {
    const std::size_t i = indices[k];
    ToolRequest req;
    req.request_id = request_base + ".f" + std::to_string(i);
    req.task = TaskType::VideoSummary;
    req.prompt = StructuredPrompt{TaskType::VideoSummary, std::nullopt, "Score keyframe classes for frame " +
                                                                            std::to_string(i) + ".", {}};
    req.image = v.frames[i];
    try {
      auto out = run_expert(client, scorer, req, 0);
      results[k] = std::move(out.per_tool);
      if (const auto* cd = std::get_if<ClassDistribution>(&out.fused.payload)) scores[k] = FrameScore{i, *cd};
    } catch (const ExpertFailure& f) {
      results[k] = f.results();
    }
  });
  FrameScoring out;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (scores[k]) out.scores.push_back(std::move(*scores[k]));
    else ++out.skipped;
    out.per_tool.insert(out.per_tool.end(), results[k].begin(), results[k].end());
  }
  return out;
}

const std::vector<PlaneLabel>& default_keyframe_classes() {
  static const std::vector<PlaneLabel> classes{PlaneLabel::TransThalamic, PlaneLabel::TransVentricular,
                                               PlaneLabel::TransCerebellar, PlaneLabel::Abdomen,
                                               PlaneLabel::Femur, PlaneLabel::NonKey};
  return classes;
}

void KeyframeParams::validate() const {
  if (!(threshold > 0 && threshold < 1)) throw ValidationError("keyframe threshold must lie in (0,1)");
  if (min_gap < 1) throw ValidationError("keyframe min_gap must be >= 1");
  if (top_m < 1) throw ValidationError("keyframe top_m must be >= 1");
}

KeyframeSet select_keyframes(std::span<const FrameScore> scores, const KeyframeParams& params) {
  params.validate();
  std::vector<PlaneLabel> order = params.classes;
  for (const PlaneLabel c : all_planes())
    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
  KeyframeSet out;
  for (const PlaneLabel c : order) {
    if (c == PlaneLabel::NonKey) continue;
    std::vector<Keyframe> candidates;
    for (const auto& s : scores) {
      const double p = s.probs.prob(c);
      if (p >= params.threshold && s.probs.argmax() == c) candidates.push_back({s.frame_index, c, p});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Keyframe& a, const Keyframe& b) {
      return a.score != b.score ? a.score > b.score : a.frame_index < b.frame_index;
    });
    std::vector<Keyframe> chosen;
    for (const auto& k : candidates) {
      if (chosen.size() >= params.top_m) break;
      const bool near = std::any_of(chosen.begin(), chosen.end(), [&](const Keyframe& s) {
        const auto gap = k.frame_index > s.frame_index ? k.frame_index - s.frame_index : s.frame_index - k.frame_index;
        return gap < params.min_gap;
      });
      if (!near) chosen.push_back(k);
    }
    out.selections.insert(out.selections.end(), chosen.begin(), chosen.end());
  }
  return out;
}

std::optional<double> lmp_ga_weeks(const PatientMetadata& m) {
  if (!m.lmp_date || !m.exam_date) return std::nullopt;
  const auto days = (std::chrono::sys_days(*m.exam_date) - std::chrono::sys_days(*m.lmp_date)).count();
  return static_cast<double>(days) / 7.0;
}

namespace {

struct Consensus {
  BiometryValue value;
  std::vector<std::size_t> frames;
};

std::optional<Consensus> consensus(const std::vector<KeyframeFindings>& kfs, TaskType task) {
  const Measure m = *measure_of(task);
  std::vector<ExpertResult> rs;
  Consensus c;
  for (const auto& k : kfs) {
    const auto v = k.bundle.biometry(task);
    if (!v || v->unit != canonical_unit(m)) continue;
    ExpertResult r;
    r.tool_id = frame_tag(k.keyframe.frame_index);
    r.task = task;
    r.payload = *v;
    r.confidence = v->confidence;
    rs.push_back(std::move(r));
    c.frames.push_back(k.keyframe.frame_index);
  }
  if (rs.empty()) return std::nullopt;
  c.value = std::get<BiometryValue>(fuse_scalars(rs).payload);
  return c;
}

std::string frame_list(const std::vector<std::size_t>& frames) {
  std::vector<std::string> s;
  for (auto f : frames) s.push_back(std::to_string(f));
  return (frames.size() == 1 ? "frame " : "frames ") + join(s);
}

}  // namespace

Report synthesize_video(const VideoFindings& vf, const ChartSet& charts, const SummarizerConfig& cfg,
                        const Clock& clock) {
  Report report;
  report.kind = ReportKind::VideoSummary;
  auto& flags = report.flags;

  std::vector<KeyframeFindings> kfs = vf.keyframes;
  std::sort(kfs.begin(), kfs.end(),
            [](const auto& a, const auto& b) { return a.keyframe.frame_index < b.keyframe.frame_index; });
  for (auto& k : kfs) {
    k.bundle = reflection_safeguard(std::move(k.bundle), charts, cfg.reflection);
    for (const auto& [key, value] : k.bundle.annotations)
      if (value == "true" && (key.ends_with(".replaced_by_reflection") || key.ends_with(".out_of_band")))
        flags.push_back(frame_tag(k.keyframe.frame_index) + "." + key);
  }

  {
    nlohmann::json p{{"video_id", vf.video_id},
                     {"frames", vf.frame_count},
                     {"fps", vf.fps},
                     {"stride", vf.stride},
                     {"frames_scored", vf.frames_scored},
                     {"frames_skipped", vf.frames_skipped},
                     {"threshold", vf.params.threshold},
                     {"min_gap", vf.params.min_gap},
                     {"top_m", vf.params.top_m}};
    std::string body = "Video " + vf.video_id + ": " + num(p["frames"]) + " frames at " + num(p["fps"]) +
                       " fps, sampled with stride " + num(p["stride"]) + " (" + num(p["frames_scored"]) +
                       " scored, " + num(p["frames_skipped"]) + " skipped).\nKeyframe policy: threshold " +
                       num(p["threshold"]) + ", min_gap " + num(p["min_gap"]) + " frames, top_m " + num(p["top_m"]) +
                       " per class.";
    report.sections.push_back({"Video", body, p});
  }

  {
    auto items = nlohmann::json::array();
    std::string body;
    for (const auto& k : vf.keyframes) {
      items.push_back(
          {{"frame_index", k.keyframe.frame_index}, {"class", to_string(k.keyframe.label)}, {"score", r2(k.keyframe.score)}});
      body += "- frame " + std::to_string(k.keyframe.frame_index) + ": " + std::string(to_string(k.keyframe.label)) +
              " (score " + num(items.back()["score"]) + ")\n";
    }
    if (items.empty()) {
      body = "No diagnostic keyframes.";
      flags.push_back("no_diagnostic_keyframes");
    } else {
      body.pop_back();
    }
    report.sections.push_back({"Keyframes", body, {{"items", items}}});
  }

  {
    auto items = nlohmann::json::array();
    std::string body;
    for (const auto& k : kfs) {
      nlohmann::json item{{"frame_index", k.keyframe.frame_index},
                          {"class", to_string(k.keyframe.label)},
                          {"segmentation", nlohmann::json::array()},
                          {"measurements", nlohmann::json::array()}};
      std::vector<std::string> parts;
      for (const auto& f : k.bundle.fused) {
        if (const auto* m = std::get_if<Mask>(&f.payload)) {
          const auto area = static_cast<std::int64_t>(m->area());
          item["segmentation"].push_back({{"task", to_string(f.task)}, {"area_px", area}});
          parts.push_back(words(f.task) + " " + num(area) + " px");
        } else if (const auto* b = std::get_if<BiometryValue>(&f.payload)) {
          item["measurements"].push_back(
              {{"measure", to_string(b->measure)}, {"value", r2(b->value)}, {"unit", to_string(b->unit)}});
          parts.push_back(measure_label(to_string(b->measure)) + " " + num(item["measurements"].back()["value"]) + " " +
                          std::string(to_string(b->unit)));
        }
      }
      body += "- frame " + std::to_string(k.keyframe.frame_index) + " (" + std::string(to_string(k.keyframe.label)) +
              "): " + (parts.empty() ? std::string("no measurements") : join(parts, "; ")) + "\n";
      items.push_back(item);
    }
    if (items.empty()) body = "Keyframe findings: not assessed.";
    else body.pop_back();
    report.sections.push_back({"Keyframe Findings", body, {{"items", items}}});
  }

  const auto ga = consensus(kfs, TaskType::GAEstimation);
  {
    auto items = nlohmann::json::array();
    std::string body;
    for (const TaskType task : {TaskType::HCMeasurement, TaskType::ACMeasurement, TaskType::AoP}) {
      const auto c = consensus(kfs, task);
      if (!c) continue;
      const std::string key(to_string(c->value.measure));
      nlohmann::json item{{"measure", key},         {"value", r2(c->value.value)}, {"unit", to_string(c->value.unit)},
                          {"frames", c->frames},    {"percentile", nullptr},       {"in_band", nullptr},
                          {"ga_weeks", nullptr},    {"band", nullptr}};
      std::string line = "- " + measure_label(key) + ": " + num(item["value"]) + " " + std::string(to_string(c->value.unit)) +
                         " (median of " + frame_list(c->frames) + ")";
      if (c->value.measure == Measure::HC || c->value.measure == Measure::AC) {
        const auto chart = charts.find(c->value.measure);
        if (chart == charts.end() || !ga || !chart->second.covers(ga->value.value)) {
          item["status"] = "unvalidated";
          line += ", percentile not assessed (no growth chart or GA consensus)";
          flags.push_back(key + ".unvalidated");
        } else {
          const auto pr = percentile_of(chart->second, ga->value.value, c->value.value);
          item["status"] = "validated";
          item["percentile"] = r1(pr.percentile);
          item["in_band"] = pr.in_band_2_5_97_5;
          item["ga_weeks"] = r2(ga->value.value);
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
    report.sections.push_back({"Biometry", body, {{"items", items}}});
  }

  const auto ga_lmp = lmp_ga_weeks(vf.metadata);
  {
    nlohmann::json p{{"ga_weeks", nullptr}, {"frames", nlohmann::json::array()}, {"lmp_ga_weeks", nullptr},
                     {"lmp_date", nullptr}, {"exam_date", nullptr}};
    std::string body;
    if (ga) {
      p["ga_weeks"] = r2(ga->value.value);
      p["frames"] = ga->frames;
      body = "GA consensus: " + num(p["ga_weeks"]) + " weeks (median of " + frame_list(ga->frames) + ").";
    } else {
      body = "GA consensus: not assessed.";
    }
    if (ga_lmp) {
      p["lmp_ga_weeks"] = r2(*ga_lmp);
      p["lmp_date"] = format_date(*vf.metadata.lmp_date);
      p["exam_date"] = format_date(*vf.metadata.exam_date);
      body += " LMP-based GA: " + num(p["lmp_ga_weeks"]) + " weeks (LMP " + p["lmp_date"].get<std::string>() +
              ", exam " + p["exam_date"].get<std::string>() + ").";
    } else {
      body += " LMP-based GA: not available.";
    }
    report.sections.push_back({"GA", body, p});
  }

  {
    nlohmann::json p{{"ga_delta_weeks", nullptr}, {"tolerance_weeks", nullptr}, {"consistent", nullptr}};
    std::string body;
    if (ga && ga_lmp) {
      const double delta = std::abs(ga->value.value - *ga_lmp);
      const double tol = ga_tolerance(*ga_lmp, cfg);
      const bool ok = delta <= tol;
      p["ga_delta_weeks"] = r2(delta);
      p["tolerance_weeks"] = r2(tol);
      p["consistent"] = ok;
      body = "Ultrasound and LMP-based GA differ by " + num(p["ga_delta_weeks"]) + " weeks (tolerance " +
             num(p["tolerance_weeks"]) + "): " + (ok ? "consistent." : "inconsistent.");
      if (!ok) flags.push_back("ga.lmp_inconsistent");
    } else {
      body = "LMP cross-reference: not assessed.";
    }
    p["flags"] = flags;
    body += "\nFlags: " + (flags.empty() ? std::string("none") : join(flags)) + ".";
    report.sections.push_back({"Consistency", body, p});
  }

  {
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> scorer;
    for (const auto& r : vf.scorer_results) (r.ok() ? scorer[r.tool_id].first : scorer[r.tool_id].second)++;
    auto scorer_json = nlohmann::json::array();
    std::string body;
    for (const auto& [id, counts] : scorer) {
      scorer_json.push_back({{"tool_id", id}, {"ok", counts.first}, {"error", counts.second}});
      body += "- scorer " + id + ": " + std::to_string(counts.first) + " ok, " + std::to_string(counts.second) +
              " errors\n";
    }
    auto frames = nlohmann::json::array();
    for (const auto& k : kfs) {
      auto tools = nlohmann::json::array();
      for (const auto& r : k.bundle.per_tool) {
        nlohmann::json t{{"tool_id", r.tool_id}, {"task", to_string(r.task)}, {"status", r.ok() ? "ok" : "error"}};
        std::string line = "- frame " + std::to_string(k.keyframe.frame_index) + " / " + std::string(to_string(r.task)) +
                           " / " + r.tool_id + ": ";
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
      frames.push_back({{"frame_index", k.keyframe.frame_index}, {"tools", tools}});
    }
    if (body.empty()) body = "No tools were invoked.";
    else body.pop_back();
    report.sections.push_back({"Audit", body, {{"scorer", scorer_json}, {"keyframes", frames}}});
  }

  report.generated_at = clock();
  report.engine_version = std::string(engine_version());
  return report;
}

}  // namespace fetal
