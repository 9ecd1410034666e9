#include "fetal/findings.hpp"

#include <algorithm>
#include <set>

#include "fetal/errors.hpp"

namespace fetal {

const FusedResult* FindingsBundle::find(TaskType task) const {
  for (const auto& f : fused)
    if (f.task == task) return &f;
  return nullptr;
}

FusedResult* FindingsBundle::find(TaskType task) {
  for (auto& f : fused)
    if (f.task == task) return &f;
  return nullptr;
}

std::optional<BiometryValue> FindingsBundle::biometry(TaskType task) const {
  const FusedResult* f = find(task);
  if (!f) return std::nullopt;
  if (const auto* b = std::get_if<BiometryValue>(&f->payload)) return *b;
  return std::nullopt;
}

std::vector<ExpertResult> FindingsBundle::tool_results(TaskType task) const {
  std::vector<ExpertResult> out;
  for (const auto& r : per_tool)
    if (r.task == task) out.push_back(r);
  return out;
}

void FindingsBundle::validate() const {
  std::set<std::pair<TaskType, std::string>> seen;
  for (const auto& r : per_tool) seen.emplace(r.task, r.tool_id);
  for (const auto& f : fused) {
    f.validate();
    for (const auto& c : f.contributors)
      if (!seen.contains({f.task, c}))
        throw ValidationError("contributor '" + c + "' missing from the per-tool audit trail");
  }
}

void to_json(nlohmann::json& j, const FindingsBundle& b) {
  j = nlohmann::json{{"fused", b.fused},
                     {"per_tool", b.per_tool},
                     {"annotations", b.annotations},
                     {"plane_confidence", b.plane_confidence}};
  if (b.plane) j["plane"] = to_string(*b.plane);
  if (b.subplane) j["subplane"] = to_string(*b.subplane);
}

void from_json(const nlohmann::json& j, FindingsBundle& b) {
  b = FindingsBundle{};
  if (j.contains("plane")) b.plane = parse_plane(j["plane"].get<std::string>());
  if (j.contains("subplane")) b.subplane = parse_plane(j["subplane"].get<std::string>());
  b.plane_confidence = j.value("plane_confidence", 0.0);
  b.fused = j.at("fused").get<std::vector<FusedResult>>();
  b.per_tool = j.at("per_tool").get<std::vector<ExpertResult>>();
  b.annotations = j.value("annotations", std::map<std::string, std::string>{});
  b.validate();
}

}  // namespace fetal
