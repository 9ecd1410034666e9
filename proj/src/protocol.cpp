#include "fetal/protocol.hpp"

#include <cmath>

#include "fetal/errors.hpp"

namespace fetal {

void ToolSpec::validate() const {
  if (tool_id.empty()) throw ValidationError("tool without tool_id");
  if (task_types.empty()) throw ValidationError("tool '" + tool_id + "' supports no tasks");
  if (timeout_ms < 1) throw ValidationError("tool '" + tool_id + "' timeout must be >= 1 ms");
  if (!(weight > 0) || !std::isfinite(weight)) throw ValidationError("tool '" + tool_id + "' weight must be positive");
  switch (transport.kind) {
    case Transport::Kind::Stdio:
      if (transport.command.empty()) throw ValidationError("stdio tool '" + tool_id + "' has no command");
      break;
    case Transport::Kind::Http:
      if (transport.base_url.empty()) throw ValidationError("http tool '" + tool_id + "' has no base_url");
      break;
    case Transport::Kind::Builtin:
      if (transport.mock.empty()) throw ValidationError("builtin tool '" + tool_id + "' names no mock");
      break;
  }
}

WeightMap ExpertSpec::weights() const {
  WeightMap w;
  for (const auto& t : tools) w[t.tool_id] = t.weight;
  return w;
}

void ExpertSpec::validate() const {
  if (expert_id.empty()) throw ValidationError("expert without expert_id");
  if (tools.empty()) throw ValidationError("expert '" + expert_id + "' has no tools");
  if (min_successes < 1 || static_cast<std::size_t>(min_successes) > tools.size())
    throw ValidationError("expert '" + expert_id + "' min_successes must lie in [1, number of tools]");
  std::set<std::string> ids;
  for (const auto& t : tools) {
    t.validate();
    if (!t.supports(task))
      throw ValidationError("tool '" + t.tool_id + "' does not support task " + std::string(to_string(task)));
    if (!ids.insert(t.tool_id).second) throw ValidationError("duplicate tool '" + t.tool_id + "' in expert " + expert_id);
  }
}

void to_json(nlohmann::json& j, const Transport& t) {
  switch (t.kind) {
    case Transport::Kind::Stdio:
      j = nlohmann::json{{"type", "stdio"}, {"command", t.command}};
      break;
    case Transport::Kind::Http:
      j = nlohmann::json{{"type", "http"}, {"base_url", t.base_url}};
      break;
    case Transport::Kind::Builtin:
      j = nlohmann::json{{"type", "builtin"}, {"mock", t.mock}};
      break;
  }
}

void from_json(const nlohmann::json& j, Transport& t) {
  t = Transport{};
  const auto type = j.at("type").get<std::string>();
  if (type == "stdio") {
    t.kind = Transport::Kind::Stdio;
    t.command = j.at("command").get<std::vector<std::string>>();
  } else if (type == "http") {
    t.kind = Transport::Kind::Http;
    t.base_url = j.at("base_url").get<std::string>();
  } else if (type == "builtin") {
    t.kind = Transport::Kind::Builtin;
    t.mock = j.at("mock").get<std::string>();
  } else {
    throw ValidationError("unknown transport type '" + type + "'");
  }
}

void to_json(nlohmann::json& j, const ToolSpec& t) {
  auto tasks = nlohmann::json::array();
  for (auto task : t.task_types) tasks.push_back(to_string(task));
  j = nlohmann::json{{"tool_id", t.tool_id},
                     {"task_types", tasks},
                     {"transport", t.transport},
                     {"timeout_ms", t.timeout_ms},
                     {"weight", t.weight},
                     {"image_transfer", t.image_transfer == ImageTransfer::Inline ? "inline" : "path"}};
}

void from_json(const nlohmann::json& j, ToolSpec& t) {
  t = ToolSpec{};
  t.tool_id = j.at("tool_id").get<std::string>();
  for (const auto& s : j.at("task_types")) t.task_types.insert(parse_task(s.get<std::string>()));
  t.transport = j.at("transport").get<Transport>();
  t.timeout_ms = j.value("timeout_ms", kDefaultTimeoutMs);
  t.weight = j.value("weight", 1.0);
  const auto transfer = j.value("image_transfer", std::string("path"));
  if (transfer == "inline") t.image_transfer = ImageTransfer::Inline;
  else if (transfer == "path") t.image_transfer = ImageTransfer::Path;
  else throw ValidationError("image_transfer must be 'path' or 'inline'");
  t.validate();
}

void to_json(nlohmann::json& j, const ExpertSpec& e) {
  j = nlohmann::json{{"expert_id", e.expert_id},
                     {"task", to_string(e.task)},
                     {"tools", e.tools},
                     {"fusion_rule", to_string(e.fusion_rule)},
                     {"min_successes", e.min_successes}};
}

void from_json(const nlohmann::json& j, ExpertSpec& e) {
  e = ExpertSpec{};
  e.expert_id = j.at("expert_id").get<std::string>();
  e.task = parse_task(j.at("task").get<std::string>());
  e.tools = j.at("tools").get<std::vector<ToolSpec>>();
  e.fusion_rule = j.contains("fusion_rule") ? parse_fusion_rule(j["fusion_rule"].get<std::string>())
                                            : default_rule_for(e.task);
  e.min_successes = j.value("min_successes", 1);
  e.validate();
}

void to_json(nlohmann::json& j, const ToolRequest& r) {
  j = nlohmann::json{{"request_id", r.request_id},
                     {"task", to_string(r.task)},
                     {"prompt", r.prompt},
                     {"image", r.image},
                     {"params", nlohmann::json::object()}};
  for (const auto& [k, v] : r.params) j["params"][k] = scalar_to_json(v);
}

void from_json(const nlohmann::json& j, ToolRequest& r) {
  r = ToolRequest{};
  r.request_id = j.at("request_id").get<std::string>();
  if (r.request_id.empty()) throw ValidationError("empty request_id");
  r.task = parse_task(j.at("task").get<std::string>());
  r.prompt = j.at("prompt").get<StructuredPrompt>();
  r.image = j.at("image").get<ImageRef>();
  if (j.contains("params"))
    for (const auto& [k, v] : j["params"].items()) r.params[k] = scalar_from_json(v);
}

void to_json(nlohmann::json& j, const ToolResponse& r) {
  j = nlohmann::json{{"request_id", r.request_id}, {"result", r.result}};
}

void from_json(const nlohmann::json& j, ToolResponse& r) {
  r.request_id = j.at("request_id").get<std::string>();
  r.result = j.at("result").get<ExpertResult>();
}

}  // namespace fetal
