#include "fetal/tool_client.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <thread>

#include "fetal/image_io.hpp"
#include "transport.hpp"

namespace fetal {

using detail::Clock;

std::string_view to_string(ExchangeOutcome::Status s) {
  switch (s) {
    case ExchangeOutcome::Status::Ok: return "ok";
    case ExchangeOutcome::Status::Timeout: return "timeout";
    case ExchangeOutcome::Status::ToolFailed: return "tool_failed";
    case ExchangeOutcome::Status::Protocol: return "protocol";
  }
  return "protocol";
}

ToolClient::ToolClient(std::shared_ptr<const MockRegistry> mocks) : mocks_(std::move(mocks)) {}

ToolClient::~ToolClient() = default;

ToolClient::Session& ToolClient::session(const std::string& tool_id) {
  std::lock_guard lock(sessions_mu_);
  auto& s = sessions_[tool_id];
  if (!s) s = std::make_unique<Session>();
  return *s;
}

ExchangeOutcome ToolClient::exchange_stdio(const ToolSpec& tool, const std::string& line, int timeout_ms) {
  using Status = ExchangeOutcome::Status;
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  Session& s = session(tool.tool_id);
  std::lock_guard lock(s.mu);
  if (s.proc && s.proc->wait_exit(Clock::now())) s.proc.reset();
  if (!s.proc) {
    try {
      s.proc = std::make_unique<detail::StdioProcess>(tool.transport.command);
    } catch (const Error& e) {
      return {Status::ToolFailed, {}, e.what()};
    }
  }
  auto& proc = *s.proc;
  std::string reply;
  auto st = proc.write_line(line) ? proc.read_line(reply, deadline) : detail::StdioProcess::ReadStatus::Eof;
  if (st == detail::StdioProcess::ReadStatus::Line) return {Status::Ok, nlohmann::json::parse(reply, nullptr, false), {}};
  if (st == detail::StdioProcess::ReadStatus::Timeout) {
    s.proc->kill();
    s.proc.reset();
    return {Status::Timeout, {}, "no reply within " + std::to_string(timeout_ms) + " ms"};
  }
  const auto code = proc.wait_exit(deadline + std::chrono::milliseconds(200));
  const bool partial = !proc.pending().empty();
  s.proc.reset();
  if (!code) return {Status::Timeout, {}, "tool closed its output but did not exit"};
  if (*code != 0) return {Status::ToolFailed, {}, "tool exited with status " + std::to_string(*code)};
  return {Status::Protocol, {}, partial ? "unterminated reply" : "tool exited without replying"};
}

ExchangeOutcome ToolClient::exchange(const ToolSpec& tool, const nlohmann::json& request, const std::string& request_id) {
  using Status = ExchangeOutcome::Status;
  ExchangeOutcome out;
  switch (tool.transport.kind) {
    case Transport::Kind::Stdio:
      out = exchange_stdio(tool, canonical_json(request), tool.timeout_ms);
      break;
    case Transport::Kind::Http:
      out = detail::http_post(tool.transport.base_url, "/invoke", canonical_json(request), tool.timeout_ms);
      break;
    case Transport::Kind::Builtin:
      throw ConfigError("builtin tool '" + tool.tool_id + "' has no wire transport");
  }
  if (out.status != Status::Ok) return out;
  if (out.body.is_discarded() || !out.body.is_object()) return {Status::Protocol, {}, "reply is not a JSON object"};
  const auto id = out.body.find("request_id");
  if (id == out.body.end() || !id->is_string() || *id != request_id)
    return {Status::Protocol, {}, "reply request_id does not match"};
  return out;
}

ToolRequest prepare_request(const ToolSpec& tool, ToolRequest req) {
  auto& img = req.image;
  if (tool.transport.kind == Transport::Kind::Builtin) return req;
  if (tool.image_transfer == ImageTransfer::Inline) {
    if (img.inline_png_base64.empty() && !img.path.empty()) {
      img.inline_png_base64 = base64_encode(read_file_bytes(img.path));
      img.path.clear();
    }
  } else if (!img.path.empty()) {
    img.path = std::filesystem::absolute(img.path).lexically_normal().string();
  }
  return req;
}

ExpertResult ToolClient::invoke(const ToolSpec& tool, const ToolRequest& req) {
  const auto start = Clock::now();
  if (tool.transport.kind == Transport::Kind::Builtin) {
    try {
      return mocks_->get(tool.transport.mock).run(tool.tool_id, req);
    } catch (const std::exception& e) {
      return ExpertResult::failure(tool.tool_id, req.task, "tool_failed");
    }
  }
  ExpertResult result = [&] {
    ToolRequest wire_req;
    try {
      wire_req = prepare_request(tool, req);
    } catch (const std::exception&) {
      return ExpertResult::failure(tool.tool_id, req.task, "tool_failed");
    }
    const auto out = exchange(tool, nlohmann::json(wire_req), req.request_id);
    if (out.status != ExchangeOutcome::Status::Ok)
      return ExpertResult::failure(tool.tool_id, req.task, std::string(to_string(out.status)));
    try {
      auto resp = out.body.get<ToolResponse>();
      if (resp.result.task != req.task) return ExpertResult::failure(tool.tool_id, req.task, "protocol");
      resp.result.tool_id = tool.tool_id;
      return resp.result;
    } catch (const std::exception&) {
      return ExpertResult::failure(tool.tool_id, req.task, "protocol");
    }
  }();
  result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
  return result;
}

std::vector<ExpertResult> ToolClient::invoke_all(const ExpertSpec& expert, const ToolRequest& req,
                                                 std::size_t parallelism) {
  const std::size_t n = expert.tools.size();
  std::vector<ExpertResult> results(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      ToolRequest r = req;
      r.request_id = req.request_id + "." + expert.tools[i].tool_id;
      results[i] = invoke(expert.tools[i], r);
    }
  };
  const std::size_t workers = std::min(parallelism == 0 ? n : parallelism, n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  std::sort(results.begin(), results.end(),
            [](const ExpertResult& a, const ExpertResult& b) { return a.tool_id < b.tool_id; });
  const auto ok = std::count_if(results.begin(), results.end(), [](const ExpertResult& r) { return r.ok(); });
  if (ok < expert.min_successes)
    throw ExpertFailure(expert.expert_id, results,
                        "expert '" + expert.expert_id + "' got " + std::to_string(ok) + " ok result(s), needs " +
                            std::to_string(expert.min_successes));
  return results;
}

}  // namespace fetal
