#include "fetal/experts.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "fetal/errors.hpp"
#include "fetal/fusion.hpp"
#include "fetal/mask_geometry.hpp"

namespace fetal {

ExpertRegistry::ExpertRegistry(std::vector<ExpertSpec> experts) : experts_(std::move(experts)) {
  std::set<std::string> ids, tool_ids;
  std::set<TaskType> tasks;
  for (const auto& e : experts_) {
    try {
      e.validate();
    } catch (const ValidationError& err) {
      throw ConfigError(err.what());
    }
    if (!ids.insert(e.expert_id).second) throw ConfigError("duplicate expert id '" + e.expert_id + "'");
    if (!tasks.insert(e.task).second)
      throw ConfigError("more than one expert registered for task " + std::string(to_string(e.task)));
    for (const auto& t : e.tools)
      if (!tool_ids.insert(t.tool_id).second) throw ConfigError("duplicate tool id '" + t.tool_id + "'");
  }
}

const ExpertSpec* ExpertRegistry::for_task(TaskType task) const {
  for (const auto& e : experts_)
    if (e.task == task) return &e;
  return nullptr;
}

const ExpertSpec& ExpertRegistry::get(const std::string& expert_id) const {
  for (const auto& e : experts_)
    if (e.expert_id == expert_id) return e;
  throw ConfigError("unknown expert '" + expert_id + "'");
}

ExpertResult derive_biometry(ExpertResult r, const ImageRef& image) {
  if (!r.ok() || !r.payload) return r;
  try {
    if (const auto* m = std::get_if<Mask>(&*r.payload)) {
      const auto measure = measure_of(r.task);
      if (!measure || (*measure != Measure::HC && *measure != Measure::AC)) return r;
      auto v = measure_hc_ac(*m, image.pixel_spacing_mm, *measure);
      v.confidence *= r.confidence;
      r.payload = v;
    } else if (const auto* s = std::get_if<MaskSet>(&*r.payload)) {
      if (r.task != TaskType::AoP) return r;
      const auto sym = s->masks.find("symphysis");
      const auto head = s->masks.find("head");
      if (sym == s->masks.end() || head == s->masks.end())
        return ExpertResult::failure(r.tool_id, r.task, "mask set lacks 'symphysis' or 'head'");
      auto v = compute_aop({sym->second, head->second});
      v.confidence *= r.confidence;
      r.payload = v;
    }
  } catch (const Error& e) {
    auto f = ExpertResult::failure(r.tool_id, r.task, std::string("geometry: ") + e.what());
    f.latency_ms = r.latency_ms;
    return f;
  }
  return r;
}

ExpertOutcome run_expert(ToolClient& client, const ExpertSpec& expert, const ToolRequest& req, std::size_t parallelism) {
  ToolRequest r = req;
  r.task = expert.task;
  ExpertOutcome out;
  out.per_tool = client.invoke_all(expert, r, parallelism);
  for (auto& res : out.per_tool) res = derive_biometry(std::move(res), r.image);
  const auto ok = std::count_if(out.per_tool.begin(), out.per_tool.end(), [](const auto& x) { return x.ok(); });
  if (ok < expert.min_successes)
    throw ExpertFailure(expert.expert_id, out.per_tool,
                        "expert '" + expert.expert_id + "': " + std::to_string(ok) + " of " +
                            std::to_string(out.per_tool.size()) + " tools succeeded, " +
                            std::to_string(expert.min_successes) + " required");
  try {
    if (expert.fusion_rule == FusionRuleId::WeightedVote) {
      std::vector<ExpertResult> oks;
      std::copy_if(out.per_tool.begin(), out.per_tool.end(), std::back_inserter(oks), [](const auto& x) { return x.ok(); });
      auto d = fuse_classification_detailed(oks, expert.weights());
      out.fused = std::move(d.result);
      out.label = d.label;
      out.label_probability = d.probability;
    } else {
      out.fused = fuse(expert.fusion_rule, out.per_tool, expert.weights());
      if (const auto* cd = std::get_if<ClassDistribution>(&out.fused.payload)) {
        out.label = cd->argmax();
        out.label_probability = cd->prob(*out.label);
      }
    }
  } catch (const FusionError& e) {
    throw ExpertFailure(expert.expert_id, out.per_tool, "expert '" + expert.expert_id + "': " + e.what());
  }
  return out;
}

}  // namespace fetal
