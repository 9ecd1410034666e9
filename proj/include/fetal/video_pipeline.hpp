#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fetal/experts.hpp"
#include "fetal/summarizer.hpp"

namespace fetal {

struct FrameScore {
  std::size_t frame_index = 0;
  ClassDistribution probs;
};

struct FrameScoring {
  std::vector<FrameScore> scores;
  std::size_t skipped = 0;
  std::vector<ExpertResult> per_tool;
};

// The scorer expert (task video_summary) on every stride-th frame. A frame
// whose scorer fails is skipped and counted.
FrameScoring score_frames(const VideoStream& v, const ExpertSpec& scorer, ToolClient& client, std::size_t stride,
                          const std::string& request_base, std::size_t parallelism = 0);

// TransThalamic, TransVentricular, TransCerebellar, Abdomen, Femur, NonKey.
const std::vector<PlaneLabel>& default_keyframe_classes();

struct KeyframeParams {
  double threshold = 0.5;
  std::size_t min_gap = 1;
  std::size_t top_m = 3;
  // Output order of classes; unlisted classes follow in label order.
  // NonKey is never selected.
  std::vector<PlaneLabel> classes = default_keyframe_classes();

  // Throws ValidationError.
  void validate() const;
};

struct Keyframe {
  std::size_t frame_index = 0;
  PlaneLabel label = PlaneLabel::NonKey;
  double score = 0.0;
  bool operator==(const Keyframe&) const = default;
};

// Grouped by class in output order; within a class by descending score.
struct KeyframeSet {
  std::vector<Keyframe> selections;
};

// Per non-NonKey class: frames whose argmax is the class with probability >= threshold,
// taken greedily by descending probability (lower index first on ties),
// skipping frames closer than min_gap to a frame already taken for the
// class, at most top_m per class.
KeyframeSet select_keyframes(std::span<const FrameScore> scores, const KeyframeParams& params);

// (exam - lmp) / 7 when both dates are present.
std::optional<double> lmp_ga_weeks(const PatientMetadata& m);

struct KeyframeFindings {
  Keyframe keyframe;
  FindingsBundle bundle;
};

struct VideoFindings {
  std::string video_id;
  std::size_t frame_count = 0;
  double fps = 1.0;
  std::size_t stride = 1;
  std::size_t frames_scored = 0;
  std::size_t frames_skipped = 0;
  KeyframeParams params;
  PatientMetadata metadata;
  std::vector<KeyframeFindings> keyframes;
  std::vector<ExpertResult> scorer_results;
};

// Applies the safeguard per keyframe, fuses keyframe-level biometry per
// measure by lower median (frames in index order), derives the GA consensus
// and checks it against the LMP date. Sections: Video, Keyframes,
// Keyframe Findings, Biometry, GA, Consistency, Audit.
Report synthesize_video(const VideoFindings& findings, const ChartSet& charts, const SummarizerConfig& cfg,
                        const Clock& clock);

}  // namespace fetal
