#include "fetal/app.hpp"

#include <chrono>
#include <fstream>

#include "fetal/errors.hpp"
#include "fetal/image_io.hpp"

namespace fetal {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ms_since(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t).count();
}

nlohmann::json query_summary(const Query& q) {
  nlohmann::json j{{"text", q.text}};
  if (q.image) {
    auto img = *q.image;
    img.inline_png_base64.clear();
    j["image"] = img;
  }
  if (q.video) {
    j["video"] = {{"id", q.video->id},
                  {"fps", q.video->fps},
                  {"frame_count", q.video->frames.size()},
                  {"metadata", q.video->metadata}};
  }
  return j;
}

template <class F>
RunOutput persist(RunStore& store, const std::string& kind, const Query& q, F&& run) {
  const std::string id = store.create_run();
  const auto start = Clock::now();
  RunOutput out;
  out.run_id = id;
  try {
    auto [record, report] = run(id);
    record["run_id"] = id;
    record["kind"] = kind;
    record["created_at"] = system_clock_utc()();
    record["query"] = query_summary(q);
    record["report"] = report;
    record["timings"] = {{"total_ms", ms_since(start)}};
    out.report_json = render(report, ReportFormat::Json);
    out.report_md = render(report, ReportFormat::Markdown);
    out.record = std::move(record);
    store.write(id, out.record, out.report_json, out.report_md);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(store.root() / id, ec);
    throw;
  }
  return out;
}

}  // namespace

ImageRef image_ref_from_file(const std::filesystem::path& path, std::optional<double> spacing_mm,
                             std::optional<PlaneLabel> plane_hint, std::string id) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw ImageError("image not found: " + path.string());
  const auto size = probe_image(path);
  ImageRef img;
  img.id = id.empty() ? path.stem().string() : std::move(id);
  img.path = std::filesystem::absolute(path).lexically_normal().string();
  img.width = size.width;
  img.height = size.height;
  img.pixel_spacing_mm = spacing_mm;
  img.plane_hint = plane_hint;
  img.validate();
  return img;
}

VideoStream video_from_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                const std::string& default_id) {
  if (!j.is_object()) throw ValidationError("video manifest must be a JSON object");
  VideoStream v;
  try {
    v.id = j.value("id", default_id);
    v.fps = j.at("fps").get<double>();
    const auto spacing = j.contains("pixel_spacing_mm") ? std::optional(j["pixel_spacing_mm"].get<double>())
                                                        : std::nullopt;
    if (j.contains("metadata")) v.metadata = j["metadata"].get<PatientMetadata>();
    for (const auto& f : j.at("frames")) {
      std::string path, id;
      auto frame_spacing = spacing;
      if (f.is_string()) {
        path = f.get<std::string>();
      } else {
        path = f.at("path").get<std::string>();
        id = f.value("id", std::string());
        if (f.contains("pixel_spacing_mm")) frame_spacing = f["pixel_spacing_mm"].get<double>();
      }
      const std::filesystem::path p(path);
      v.frames.push_back(image_ref_from_file(p.is_absolute() ? p : base_dir / p, frame_spacing, std::nullopt, id));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("invalid video manifest: ") + e.what());
  }
  v.validate();
  return v;
}

VideoStream load_video_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open video manifest '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("video manifest '" + path.string() + "' is not valid JSON");
  return video_from_manifest(j, std::filesystem::absolute(path).parent_path(), path.stem().string());
}

RunOutput run_image_query(Engine& engine, RunStore& store, const Query& q) {
  return persist(store, "image_caption", q, [&](const std::string& id) {
    auto run = engine.analyze(q, id);
    nlohmann::json record{{"intent", to_string(run.intent)}, {"plan", run.plan}, {"findings", run.findings}};
    return std::pair{record, run.report};
  });
}

RunOutput run_video_query(Engine& engine, RunStore& store, const Query& q) {
  return persist(store, "video_summary", q, [&](const std::string& id) {
    auto run = engine.summarize_video(q, id);
    auto keyframes = nlohmann::json::array();
    for (const auto& k : run.findings.keyframes)
      keyframes.push_back({{"frame_index", k.keyframe.frame_index},
                           {"class", to_string(k.keyframe.label)},
                           {"score", k.keyframe.score},
                           {"findings", k.bundle}});
    nlohmann::json record{{"intent", to_string(run.intent)},
                          {"plan", run.plan},
                          {"scorer_results", run.findings.scorer_results},
                          {"keyframes", keyframes}};
    return std::pair{record, run.report};
  });
}

}  // namespace fetal
