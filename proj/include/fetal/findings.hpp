#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fetal/domain.hpp"

namespace fetal {

// Everything the experts produced for one image, handed to the summarizer.
struct FindingsBundle {
  std::optional<PlaneLabel> plane;
  std::optional<PlaneLabel> subplane;
  double plane_confidence = 0.0;
  std::vector<FusedResult> fused;
  // Audit trail; every fused contributor appears here.
  std::vector<ExpertResult> per_tool;
  std::map<std::string, std::string> annotations;

  [[nodiscard]] const FusedResult* find(TaskType task) const;
  [[nodiscard]] FusedResult* find(TaskType task);
  [[nodiscard]] std::optional<BiometryValue> biometry(TaskType task) const;
  [[nodiscard]] std::vector<ExpertResult> tool_results(TaskType task) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const FindingsBundle& b);
void from_json(const nlohmann::json& j, FindingsBundle& b);

}  // namespace fetal
