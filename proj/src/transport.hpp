#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <sys/types.h>
#include <vector>

#include "fetal/tool_client.hpp"

namespace fetal::detail {

using Clock = std::chrono::steady_clock;

// A child process whose stdin and stdout are one end of a socket pair, so
// writes to a dead child fail with EPIPE instead of raising SIGPIPE.
class StdioProcess {
 public:
  explicit StdioProcess(const std::vector<std::string>& argv);
  ~StdioProcess();
  StdioProcess(const StdioProcess&) = delete;
  StdioProcess& operator=(const StdioProcess&) = delete;

  enum class ReadStatus { Line, Timeout, Eof };

  bool write_line(const std::string& line);
  ReadStatus read_line(std::string& out, Clock::time_point deadline);
  // Bytes received after the last complete line.
  [[nodiscard]] const std::string& pending() const { return buffer_; }
  // Reaps the child after EOF; nullopt if it is still running at the deadline.
  std::optional<int> wait_exit(Clock::time_point deadline);
  void kill();

 private:
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
  bool reaped_ = false;
};

ExchangeOutcome http_post(const std::string& base_url, const std::string& path, const std::string& body, int timeout_ms);

}  // namespace fetal::detail
