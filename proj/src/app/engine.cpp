#include "fetal/engine.hpp"

#include <algorithm>
#include <cmath>

#include "fetal/errors.hpp"
#include "../parallel.hpp"

namespace fetal {

namespace {

std::shared_ptr<MockRegistry> build_mocks(const EngineConfig& cfg) {
  auto mocks = std::make_shared<MockRegistry>();
  for (const auto& [name, behavior] : cfg.mocks) mocks->add(name, parse_mock_behavior(behavior));
  return mocks;
}

bool has_task(const FindingsBundle& b, TaskType t) {
  return std::any_of(b.fused.begin(), b.fused.end(), [&](const FusedResult& f) { return f.task == t; });
}

}  // namespace

Engine::Engine(EngineConfig cfg)
    : cfg_(std::move(cfg)),
      registry_(cfg_.experts),
      lexicon_(cfg_.lexicon ? Lexicon::load(*cfg_.lexicon) : Lexicon::builtin()),
      client_(std::make_unique<ToolClient>(build_mocks(cfg_))),
      clock_(cfg_.clock ? fixed_clock(*cfg_.clock) : system_clock_utc()) {
  for (const auto& [measure, path] : cfg_.charts) charts_.emplace(measure, load_chart(path, measure));
  if (cfg_.intent_tool) parser_ = std::make_unique<ToolIntentParser>(*client_, *cfg_.intent_tool, lexicon_);
  else parser_ = std::make_unique<RuleIntentParser>(lexicon_);
  summarizer_.reflection = cfg_.reflection;
  summarizer_.ga_tolerance_weeks = cfg_.ga_tolerance_weeks;
}

KeyframeParams Engine::keyframe_params(double fps) const {
  KeyframeParams p;
  p.threshold = cfg_.video.threshold;
  p.top_m = cfg_.video.top_m;
  p.min_gap = cfg_.video.min_gap ? *cfg_.video.min_gap : std::max<std::size_t>(1, std::llround(fps));
  if (!cfg_.video.classes.empty()) p.classes = cfg_.video.classes;
  return p;
}

void Engine::run_plan(FindingsBundle& bundle, const DispatchPlan& plan, const ImageRef& image, const std::string& text,
                      const std::string& request_base) {
  for (const auto& id : plan.experts) {
    const ExpertSpec& spec = registry_.get(id);
    if (has_task(bundle, spec.task)) continue;
    ToolRequest req;
    req.request_id = request_base + "." + id;
    req.task = spec.task;
    req.prompt = make_prompt(spec.task, bundle.plane, text);
    if (bundle.subplane) req.prompt.params["subplane"] = std::string(to_string(*bundle.subplane));
    req.image = image;
    auto out = run_expert(*client_, spec, req, cfg_.parallelism);
    bundle.fused.push_back(std::move(out.fused));
    bundle.per_tool.insert(bundle.per_tool.end(), out.per_tool.begin(), out.per_tool.end());
  }
}

ImageRun Engine::analyze(const Query& q, const std::string& request_base) {
  q.validate();
  if (!q.image) throw ValidationError("analyze needs an image query");
  ImageRun run;
  run.intent = parser_->classify(q);
  if (run.intent == TaskType::VideoSummary) run.intent = TaskType::ImageCaption;

  FindingsBundle& b = run.findings;
  try {
    auto pid = identify_plane(*q.image, registry_, *client_, request_base, cfg_.parallelism);
    b.plane = pid.plane;
    b.plane_confidence = pid.confidence;
    b.subplane = pid.subplane;
    b.fused = std::move(pid.fused);
    b.per_tool = std::move(pid.per_tool);
  } catch (const PlanError&) {
    if (run.intent == TaskType::ImageCaption) throw;
  }
  run.plan = build_plan(q, run.intent, b.plane, registry_, lexicon_);
  if (b.subplane) run.plan.prompt.params["subplane"] = std::string(to_string(*b.subplane));
  run_plan(b, run.plan, *q.image, q.text, request_base);
  b.validate();
  run.report = synthesize_caption(b, charts_, summarizer_, clock_);
  return run;
}

FindingsBundle Engine::analyze_with_plane(const ImageRef& image, const std::string& text, PlaneLabel label,
                                          double confidence, const std::string& request_base) {
  FindingsBundle b;
  b.plane = parent_plane(label);
  b.plane_confidence = confidence;
  if (is_brain_subplane(label)) b.subplane = label;
  Query q{text, image, std::nullopt};
  const auto plan = build_plan(q, TaskType::ImageCaption, b.plane, registry_, lexicon_);
  run_plan(b, plan, image, text, request_base);
  b.validate();
  return b;
}

VideoRun Engine::summarize_video(const Query& q, const std::string& request_base) {
  q.validate();
  if (!q.video) throw ValidationError("summarize_video needs a video query");
  const VideoStream& v = *q.video;
  VideoRun run;
  run.intent = parser_->classify(q);
  run.plan = build_plan(q, TaskType::VideoSummary, std::nullopt, registry_, lexicon_);
  const ExpertSpec& scorer = registry_.get(run.plan.experts.front());

  VideoFindings& vf = run.findings;
  vf.video_id = v.id;
  vf.frame_count = v.frames.size();
  vf.fps = v.fps;
  vf.stride = cfg_.video.stride;
  vf.params = keyframe_params(v.fps);
  vf.metadata = v.metadata;
  auto scoring = score_frames(v, scorer, *client_, vf.stride, request_base, cfg_.parallelism);
  vf.frames_scored = scoring.scores.size();
  vf.frames_skipped = scoring.skipped;
  vf.scorer_results = std::move(scoring.per_tool);
  const auto selected = select_keyframes(scoring.scores, vf.params);

  vf.keyframes.resize(selected.selections.size());
  detail::parallel_for(selected.selections.size(), cfg_.parallelism, [&](std::size_t i) {
    const Keyframe& k = selected.selections[i];
    vf.keyframes[i] = {k, analyze_with_plane(v.frames[k.frame_index], q.text, k.label, k.score,
                                             request_base + ".k" + std::to_string(k.frame_index))};
  });
  run.report = synthesize_video(vf, charts_, summarizer_, clock_);
  return run;
}

}  // namespace fetal
