#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetal/errors.hpp"
#include "fetal/mock_experts.hpp"
#include "fetal/protocol.hpp"

namespace fetal {

// Fewer than min_successes tools of an expert returned ok results.
class ExpertFailure : public Error {
 public:
  ExpertFailure(std::string expert_id, std::vector<ExpertResult> results, const std::string& what)
      : Error(what), expert_id_(std::move(expert_id)), results_(std::move(results)) {}
  [[nodiscard]] const std::string& expert_id() const { return expert_id_; }
  [[nodiscard]] const std::vector<ExpertResult>& results() const { return results_; }

 private:
  std::string expert_id_;
  std::vector<ExpertResult> results_;
};

struct ExchangeOutcome {
  enum class Status { Ok, Timeout, ToolFailed, Protocol };
  Status status = Status::Ok;
  nlohmann::json body;
  std::string detail;
};

// Error-status messages for transport failures.
std::string_view to_string(ExchangeOutcome::Status s);

namespace detail {
class StdioProcess;
}

class ToolClient {
 public:
  explicit ToolClient(std::shared_ptr<const MockRegistry> mocks = std::make_shared<MockRegistry>());
  ~ToolClient();
  ToolClient(const ToolClient&) = delete;
  ToolClient& operator=(const ToolClient&) = delete;

  // Never throws for tool-side failures: timeouts, crashes and malformed
  // replies become error-status results.
  ExpertResult invoke(const ToolSpec& tool, const ToolRequest& req);

  // One result per tool, sorted by tool_id. Each tool sees request id
  // "<request_id>.<tool_id>". parallelism 0 means one worker per tool.
  // Throws ExpertFailure when fewer than min_successes results are ok.
  std::vector<ExpertResult> invoke_all(const ExpertSpec& expert, const ToolRequest& req, std::size_t parallelism = 0);

  // One raw JSON round trip over a stdio or HTTP transport. The reply must
  // be an object whose request_id equals `request_id`.
  ExchangeOutcome exchange(const ToolSpec& tool, const nlohmann::json& request, const std::string& request_id);

 private:
  struct Session {
    std::mutex mu;
    std::unique_ptr<detail::StdioProcess> proc;
  };

  ExchangeOutcome exchange_stdio(const ToolSpec& tool, const std::string& line, int timeout_ms);
  Session& session(const std::string& tool_id);

  std::shared_ptr<const MockRegistry> mocks_;
  std::mutex sessions_mu_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
};

// Copy of the request with the image in the form the tool expects: an
// absolute path, or inline base64 PNG bytes.
ToolRequest prepare_request(const ToolSpec& tool, ToolRequest req);

}  // namespace fetal
