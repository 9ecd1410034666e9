#pragma once

#include <memory>
#include <string>

#include "fetal/config.hpp"
#include "fetal/coordinator.hpp"
#include "fetal/summarizer.hpp"
#include "fetal/video_pipeline.hpp"

namespace fetal {

struct ImageRun {
  TaskType intent = TaskType::ImageCaption;
  DispatchPlan plan;
  FindingsBundle findings;
  Report report;
};

struct VideoRun {
  TaskType intent = TaskType::VideoSummary;
  DispatchPlan plan;
  VideoFindings findings;
  Report report;
};

// Coordinator, experts and summarizer wired from one config. Safe for
// concurrent analyze/summarize calls.
class Engine {
 public:
  explicit Engine(EngineConfig cfg);

  // classify intent -> identify plane -> plan -> run experts -> report.
  // Throws PlanError, ExpertFailure, ValidationError.
  ImageRun analyze(const Query& q, const std::string& request_base);

  // score frames -> select keyframes -> caption suite per keyframe -> report.
  VideoRun summarize_video(const Query& q, const std::string& request_base);

  // Runs the caption suite for `plane` on one image.
  FindingsBundle analyze_with_plane(const ImageRef& image, const std::string& text, PlaneLabel label,
                                    double confidence, const std::string& request_base);

  [[nodiscard]] const EngineConfig& config() const { return cfg_; }
  [[nodiscard]] const ExpertRegistry& registry() const { return registry_; }
  [[nodiscard]] const ChartSet& charts() const { return charts_; }
  [[nodiscard]] const Lexicon& lexicon() const { return lexicon_; }
  [[nodiscard]] ToolClient& client() { return *client_; }
  [[nodiscard]] KeyframeParams keyframe_params(double fps) const;

 private:
  void run_plan(FindingsBundle& bundle, const DispatchPlan& plan, const ImageRef& image, const std::string& text,
                const std::string& request_base);

  EngineConfig cfg_;
  ExpertRegistry registry_;
  ChartSet charts_;
  Lexicon lexicon_;
  std::unique_ptr<ToolClient> client_;
  std::unique_ptr<IntentParser> parser_;
  SummarizerConfig summarizer_;
  Clock clock_;
};

}  // namespace fetal
