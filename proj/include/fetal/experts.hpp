#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fetal/protocol.hpp"
#include "fetal/tool_client.hpp"

namespace fetal {

// Read-only set of experts, at most one per task. Tool ids are unique across
// the whole registry.
class ExpertRegistry {
 public:
  ExpertRegistry() = default;
  // Throws ConfigError on duplicate expert ids, tasks or tool ids.
  explicit ExpertRegistry(std::vector<ExpertSpec> experts);

  [[nodiscard]] const ExpertSpec* for_task(TaskType task) const;
  // Throws ConfigError on an unknown id.
  [[nodiscard]] const ExpertSpec& get(const std::string& expert_id) const;
  [[nodiscard]] const std::vector<ExpertSpec>& experts() const { return experts_; }

 private:
  std::vector<ExpertSpec> experts_;
};

struct ExpertOutcome {
  FusedResult fused;
  std::vector<ExpertResult> per_tool;
  // Classification experts: the fused label and its probability.
  std::optional<PlaneLabel> label;
  double label_probability = 0.0;
};

// Converts mask payloads of biometry tasks into measurements: HC/AC masks go
// through the ellipse pipeline with the image spacing, AoP mask sets through
// the tangent construction. Geometry failures become error-status results.
ExpertResult derive_biometry(ExpertResult r, const ImageRef& image);

// invoke_all, derive biometry, re-check min_successes, fuse.
// Throws ExpertFailure.
ExpertOutcome run_expert(ToolClient& client, const ExpertSpec& expert, const ToolRequest& req,
                         std::size_t parallelism = 0);

}  // namespace fetal
