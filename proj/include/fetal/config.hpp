#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetal/growth_charts.hpp"
#include "fetal/protocol.hpp"
#include "fetal/summarizer.hpp"

namespace fetal {

struct VideoDefaults {
  double threshold = 0.5;
  // Unset: one second of frames, round(fps), at least 1.
  std::optional<std::size_t> min_gap;
  std::size_t top_m = 3;
  std::size_t stride = 1;
  std::vector<PlaneLabel> classes;
};

struct EngineConfig {
  std::vector<ExpertSpec> experts;
  // Named builtin mock behaviors, in parse_mock_behavior JSON form.
  std::map<std::string, nlohmann::json> mocks;
  std::map<Measure, std::filesystem::path> charts;
  std::optional<std::filesystem::path> lexicon;
  // External intent parser; rule-based when unset.
  std::optional<ToolSpec> intent_tool;
  VideoDefaults video;
  std::size_t parallelism = 0;
  int timeout_ms = kDefaultTimeoutMs;
  ReflectionConfig reflection;
  std::optional<double> ga_tolerance_weeks;
  std::filesystem::path runs_dir = "runs";
  int port = 8080;
  // Pinned report timestamp; the system clock when unset.
  std::optional<std::string> clock;

  // Paths exist, ids unique, mocks resolvable. Throws ConfigError.
  void validate() const;
};

// Relative paths (charts, lexicon, runs_dir, stdio commands containing '/')
// resolve against base_dir. Tools without timeout_ms get the config default.
EngineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;
EnvLookup process_env();

// FETAL_CHART_HC, FETAL_CHART_AC, FETAL_LEXICON, FETAL_RUNS_DIR, FETAL_PORT,
// FETAL_CLOCK.
void apply_env_overrides(EngineConfig& cfg, const EnvLookup& env);

// parse_config + apply_env_overrides + validate.
EngineConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env());

}  // namespace fetal
