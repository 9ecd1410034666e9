#pragma once

#include <memory>
#include <string>

#include "fetal/app.hpp"

namespace fetal {

// HTTP API over the shared run path:
//   POST /v1/analyze          JSON {"query","image":{"path","pixel_spacing_mm","plane_hint","id"}}
//                             or multipart fields image (file), query, pixel_spacing_mm, plane_hint
//   POST /v1/summarize-video  JSON {"query","manifest": path} or {"query","video": manifest object}
//   GET  /v1/runs/{id}        stored run record
//   GET  /healthz             "ok"
// Reports are returned byte-for-byte as the CLI writes report.json; the run
// id travels in the X-Run-Id header.
class Service {
 public:
  Service(Engine& engine, RunStore& store);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void wait_until_ready();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fetal
