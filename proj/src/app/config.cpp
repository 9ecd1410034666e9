#include "fetal/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "fetal/errors.hpp"
#include "fetal/experts.hpp"
#include "fetal/mock_experts.hpp"
#include "fetal/video_pipeline.hpp"

namespace fetal {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

void resolve_command(ToolSpec& t, const std::filesystem::path& base) {
  if (t.transport.kind != Transport::Kind::Stdio || t.transport.command.empty()) return;
  auto& exe = t.transport.command.front();
  if (exe.find('/') != std::string::npos) exe = resolve(base, exe).string();
}

ToolSpec parse_tool(nlohmann::json j, int default_timeout, const std::filesystem::path& base) {
  if (!j.contains("timeout_ms")) j["timeout_ms"] = default_timeout;
  auto t = j.get<ToolSpec>();
  resolve_command(t, base);
  return t;
}

}  // namespace

void EngineConfig::validate() const {
  try {
    ExpertRegistry registry(experts);
    const MockRegistry presets;
    for (const auto& e : experts)
      for (const auto& t : e.tools)
        if (t.transport.kind == Transport::Kind::Builtin && !mocks.contains(t.transport.mock) &&
            !presets.contains(t.transport.mock))
          throw ConfigError("tool '" + t.tool_id + "' names unknown mock '" + t.transport.mock + "'");
    for (const auto& [name, behavior] : mocks) parse_mock_behavior(behavior);
    for (const auto& [measure, path] : charts)
      if (!std::filesystem::is_regular_file(path))
        throw ConfigError("chart for " + std::string(to_string(measure)) + " not found: " + path.string());
    if (lexicon && !std::filesystem::is_regular_file(*lexicon))
      throw ConfigError("lexicon not found: " + lexicon->string());
    KeyframeParams kp;
    kp.threshold = video.threshold;
    kp.top_m = video.top_m;
    if (video.min_gap) kp.min_gap = *video.min_gap;
    if (!video.classes.empty()) kp.classes = video.classes;
    kp.validate();
    if (video.stride < 1) throw ConfigError("video stride must be >= 1");
    if (timeout_ms < 1) throw ConfigError("timeout_ms must be >= 1");
    if (port < 0 || port > 65535) throw ConfigError("port out of range");
    if (!(reflection.lower_percentile < reflection.upper_percentile))
      throw ConfigError("reflection band is empty");
    if (ga_tolerance_weeks && !(*ga_tolerance_weeks >= 0)) throw ConfigError("ga_tolerance_weeks must be >= 0");
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

EngineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base) {
  EngineConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    c.timeout_ms = j.value("timeout_ms", kDefaultTimeoutMs);
    for (auto e : j.value("experts", nlohmann::json::array())) {
      auto& tools = e.at("tools");
      for (auto& t : tools)
        if (!t.contains("timeout_ms")) t["timeout_ms"] = c.timeout_ms;
      auto spec = e.get<ExpertSpec>();
      for (auto& t : spec.tools) resolve_command(t, base);
      c.experts.push_back(std::move(spec));
    }
    const auto mocks = j.value("mocks", nlohmann::json::object());
    for (const auto& [name, b] : mocks.items()) c.mocks[name] = b;
    const auto charts = j.value("charts", nlohmann::json::object());
    for (const auto& [m, p] : charts.items())
      c.charts[parse_measure(m)] = resolve(base, p.get<std::string>());
    if (j.contains("lexicon")) c.lexicon = resolve(base, j["lexicon"].get<std::string>());
    if (j.contains("intent_tool")) {
      auto t = j["intent_tool"];
      t["tool_id"] = t.value("tool_id", std::string("intent"));
      t["task_types"] = nlohmann::json::array({"image_caption"});
      c.intent_tool = parse_tool(t, c.timeout_ms, base);
    }
    if (j.contains("video")) {
      const auto& v = j["video"];
      c.video.threshold = v.value("threshold", c.video.threshold);
      if (v.contains("min_gap") && !v["min_gap"].is_null()) c.video.min_gap = v["min_gap"].get<std::size_t>();
      c.video.top_m = v.value("top_m", c.video.top_m);
      c.video.stride = v.value("stride", c.video.stride);
      for (const auto& cls : v.value("classes", nlohmann::json::array()))
        c.video.classes.push_back(parse_plane(cls.get<std::string>()));
    }
    c.parallelism = j.value("parallelism", std::size_t{0});
    if (j.contains("reflection")) {
      c.reflection.lower_percentile = j["reflection"].value("lower_percentile", c.reflection.lower_percentile);
      c.reflection.upper_percentile = j["reflection"].value("upper_percentile", c.reflection.upper_percentile);
    }
    if (j.contains("ga_tolerance_weeks") && !j["ga_tolerance_weeks"].is_null())
      c.ga_tolerance_weeks = j["ga_tolerance_weeks"].get<double>();
    if (j.contains("runs_dir")) c.runs_dir = resolve(base, j["runs_dir"].get<std::string>());
    c.port = j.value("port", c.port);
    if (j.contains("clock")) c.clock = j["clock"].get<std::string>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

EnvLookup process_env() {
  return [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
}

void apply_env_overrides(EngineConfig& cfg, const EnvLookup& env) {
  if (auto v = env("FETAL_CHART_HC")) cfg.charts[Measure::HC] = std::filesystem::absolute(*v);
  if (auto v = env("FETAL_CHART_AC")) cfg.charts[Measure::AC] = std::filesystem::absolute(*v);
  if (auto v = env("FETAL_LEXICON")) cfg.lexicon = std::filesystem::absolute(*v);
  if (auto v = env("FETAL_RUNS_DIR")) cfg.runs_dir = std::filesystem::absolute(*v);
  if (auto v = env("FETAL_PORT")) {
    try {
      cfg.port = std::stoi(*v);
    } catch (const std::exception&) {
      throw ConfigError("FETAL_PORT is not a number: " + *v);
    }
  }
  if (auto v = env("FETAL_CLOCK")) cfg.clock = *v;
}

EngineConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path.string() + "' is not valid JSON");
  auto cfg = parse_config(j, std::filesystem::absolute(path).parent_path());
  apply_env_overrides(cfg, env);
  cfg.validate();
  return cfg;
}

}  // namespace fetal
