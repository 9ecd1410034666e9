#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fetal/domain.hpp"
#include "fetal/experts.hpp"

namespace fetal {

struct IntentRule {
  std::string pattern;
  TaskType task = TaskType::ImageCaption;
  int priority = 0;
};

// Case-insensitive phrase match bounded by non-alphanumeric characters.
bool phrase_matches(std::string_view text, std::string_view pattern);

class Lexicon {
 public:
  explicit Lexicon(std::vector<IntentRule> rules);
  // The lexicon shipped in data/lexicon.json.
  static Lexicon builtin();
  // JSON array of {pattern, task, priority}; throws ConfigError.
  static Lexicon from_json(const nlohmann::json& j);
  static Lexicon load(const std::filesystem::path& path);

  [[nodiscard]] const std::vector<IntentRule>& rules() const { return rules_; }
  // Highest-priority matching rule; ties go to the earlier rule.
  [[nodiscard]] const IntentRule* match(std::string_view text) const;
  [[nodiscard]] bool mentions(std::string_view text, TaskType task) const;

 private:
  std::vector<IntentRule> rules_;
};

// Rule match, else VideoSummary for video input and ImageCaption for images.
// Image input never resolves to VideoSummary.
TaskType classify_intent(const Query& q, const Lexicon& lexicon);

class IntentParser {
 public:
  virtual ~IntentParser() = default;
  virtual TaskType classify(const Query& q) = 0;
};

class RuleIntentParser : public IntentParser {
 public:
  explicit RuleIntentParser(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}
  TaskType classify(const Query& q) override { return classify_intent(q, lexicon_); }

 private:
  Lexicon lexicon_;
};

// Asks an external model over the tool protocol. Request:
//   {"request_id","query","input":"image"|"video","tasks":[...]}
// Reply: {"request_id","task"}. Anything unusable falls back to the rules.
class ToolIntentParser : public IntentParser {
 public:
  ToolIntentParser(ToolClient& client, ToolSpec tool, Lexicon fallback)
      : client_(client), tool_(std::move(tool)), fallback_(std::move(fallback)) {}
  TaskType classify(const Query& q) override;
  [[nodiscard]] std::size_t fallbacks() const { return fallbacks_; }

 private:
  ToolClient& client_;
  ToolSpec tool_;
  Lexicon fallback_;
  std::atomic<std::size_t> counter_{0};
  std::atomic<std::size_t> fallbacks_{0};
};

struct PlaneIdentification {
  PlaneLabel plane = PlaneLabel::Other;
  double confidence = 0.0;
  std::optional<PlaneLabel> subplane;
  double subplane_confidence = 0.0;
  std::vector<FusedResult> fused;
  std::vector<ExpertResult> per_tool;
};

// Fused argmax of the plane expert, then the brain sub-plane expert when the
// plane is Brain. Without a plane expert the image's plane hint is used.
// Throws ExpertFailure, or PlanError when neither source exists.
PlaneIdentification identify_plane(const ImageRef& image, const ExpertRegistry& registry, ToolClient& client,
                                   const std::string& request_id, std::size_t parallelism = 0);

struct DispatchPlan {
  TaskType task = TaskType::ImageCaption;
  std::optional<PlaneLabel> plane;
  StructuredPrompt prompt;
  std::vector<std::string> experts;

  void validate(const ExpertRegistry& registry) const;
};

void to_json(nlohmann::json& j, const DispatchPlan& p);

// Tasks an ImageCaption request expands to for a plane.
std::vector<TaskType> caption_suite(std::optional<PlaneLabel> plane, std::string_view text, const Lexicon& lexicon);

StructuredPrompt make_prompt(TaskType task, std::optional<PlaneLabel> plane, std::string_view text);

// Throws PlanError naming the first task without a registered expert.
DispatchPlan build_plan(const Query& q, TaskType task, std::optional<PlaneLabel> plane, const ExpertRegistry& registry,
                        const Lexicon& lexicon);

}  // namespace fetal
