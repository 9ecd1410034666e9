#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

namespace fetal {

// Directory tree runs/<run_id>/{record.json,report.json,report.md} plus
// runs/index.json. Records are written once and never modified.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);

  [[nodiscard]] const std::filesystem::path& root() const { return root_; }

  // Reserves a fresh run directory and returns its id.
  std::string create_run();
  // Writes the run's files and appends an index entry. Throws if the run
  // was already written.
  void write(const std::string& run_id, const nlohmann::json& record, const std::string& report_json,
             const std::string& report_md);
  [[nodiscard]] std::optional<nlohmann::json> load(const std::string& run_id) const;
  [[nodiscard]] nlohmann::json index() const;

  static bool valid_run_id(const std::string& id);

 private:
  std::filesystem::path root_;
  std::mutex mu_;
};

}  // namespace fetal
