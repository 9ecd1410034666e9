#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetal/domain.hpp"
#include "fetal/fusion.hpp"

namespace fetal {

inline constexpr int kDefaultTimeoutMs = 30000;

struct Transport {
  enum class Kind { Stdio, Http, Builtin };
  Kind kind = Kind::Builtin;
  std::vector<std::string> command;  // stdio: argv
  std::string base_url;              // http
  std::string mock;                  // builtin: mock name
};

enum class ImageTransfer { Path, Inline };

struct ToolSpec {
  std::string tool_id;
  std::set<TaskType> task_types;
  Transport transport;
  int timeout_ms = kDefaultTimeoutMs;
  double weight = 1.0;
  ImageTransfer image_transfer = ImageTransfer::Path;

  [[nodiscard]] bool supports(TaskType t) const { return task_types.contains(t); }
  void validate() const;
};

struct ExpertSpec {
  std::string expert_id;
  TaskType task = TaskType::PlaneClassification;
  std::vector<ToolSpec> tools;
  FusionRuleId fusion_rule = FusionRuleId::WeightedVote;
  int min_successes = 1;

  [[nodiscard]] WeightMap weights() const;
  void validate() const;
};

struct ToolRequest {
  std::string request_id;
  TaskType task = TaskType::PlaneClassification;
  StructuredPrompt prompt;
  ImageRef image;
  ParamMap params;
};

struct ToolResponse {
  std::string request_id;
  ExpertResult result;
};

void to_json(nlohmann::json& j, const Transport& t);
void from_json(const nlohmann::json& j, Transport& t);
void to_json(nlohmann::json& j, const ToolSpec& t);
void from_json(const nlohmann::json& j, ToolSpec& t);
// fusion_rule defaults to the task's rule and min_successes to 1.
void to_json(nlohmann::json& j, const ExpertSpec& e);
void from_json(const nlohmann::json& j, ExpertSpec& e);
void to_json(nlohmann::json& j, const ToolRequest& r);
void from_json(const nlohmann::json& j, ToolRequest& r);
void to_json(nlohmann::json& j, const ToolResponse& r);
void from_json(const nlohmann::json& j, ToolResponse& r);

}  // namespace fetal
