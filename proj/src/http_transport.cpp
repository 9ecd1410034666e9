#include <httplib.h>

#include "transport.hpp"

namespace fetal::detail {

ExchangeOutcome http_post(const std::string& base_url, const std::string& path, const std::string& body, int timeout_ms) {
  using Status = ExchangeOutcome::Status;
  const auto start = Clock::now();
  httplib::Client cli(base_url);
  if (!cli.is_valid()) return {Status::ToolFailed, {}, "invalid base_url '" + base_url + "'"};
  const auto t = std::chrono::milliseconds(timeout_ms);
  cli.set_connection_timeout(t);
  cli.set_read_timeout(t);
  cli.set_write_timeout(t);
  auto res = cli.Post(path, body, "application/json");
  if (!res) {
    const auto elapsed = Clock::now() - start;
    if (res.error() == httplib::Error::ConnectionTimeout || elapsed >= t)
      return {Status::Timeout, {}, httplib::to_string(res.error())};
    return {Status::ToolFailed, {}, httplib::to_string(res.error())};
  }
  if (res->status != 200) return {Status::ToolFailed, {}, "HTTP " + std::to_string(res->status)};
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) return {Status::Protocol, {}, "malformed JSON body"};
  return {Status::Ok, std::move(parsed), {}};
}

}  // namespace fetal::detail
