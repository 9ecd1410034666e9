#include "fetal/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "fetal/errors.hpp"

namespace fetal {

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(canonical_json(nlohmann::json{{"error", message}}) + "\n", "application/json");
}

void send_report(httplib::Response& res, const RunOutput& out) {
  res.status = 200;
  res.set_header("X-Run-Id", out.run_id);
  res.set_content(out.report_json, "application/json");
}

// Maps engine errors onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const PlanError& e) {
    send_error(res, 503, e.what());
  } catch (const ExpertFailure& e) {
    send_error(res, 502, e.what());
  } catch (const ConfigError& e) {
    send_error(res, 500, e.what());
  } catch (const Error& e) {
    send_error(res, 400, e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, std::string("malformed request: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

std::optional<PlaneLabel> optional_plane(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_plane(s);
}

std::optional<double> optional_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ValidationError("not a number: " + s);
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

}  // namespace

struct Service::Impl {
  Engine& engine;
  RunStore& store;
  httplib::Server server;

  Impl(Engine& e, RunStore& s) : engine(e), store(s) {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    server.Get(R"(/v1/runs/([A-Za-z0-9-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto rec = store.load(req.matches[1]);
      if (!rec) return send_error(res, 404, "unknown run '" + std::string(req.matches[1]) + "'");
      res.set_content(canonical_json(*rec) + "\n", "application/json");
    });
    server.Get(R"(/v1/runs/(.*))", [](const httplib::Request& req, httplib::Response& res) {
      send_error(res, 404, "unknown run '" + std::string(req.matches[1]) + "'");
    });
    server.Post("/v1/analyze", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { analyze(req, res); });
    });
    server.Post("/v1/summarize-video", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { summarize(req, res); });
    });
  }

  void analyze(const httplib::Request& req, httplib::Response& res) {
    Query q;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("image")) throw ValidationError("multipart request lacks an 'image' part");
      const auto file = req.get_file_value("image");
      const auto field = [&](const char* name) { return req.has_file(name) ? req.get_file_value(name).content : ""; };
      const auto uploads = store.root() / "uploads";
      std::filesystem::create_directories(uploads);
      std::string stem = std::filesystem::path(file.filename).stem().string();
      const bool safe = std::all_of(stem.begin(), stem.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
      });
      if (stem.empty() || stem.size() > 64 || !safe) stem = "upload";
      const auto path = uploads / (stem + "-" + std::to_string(std::random_device{}()) +
                                   std::filesystem::path(file.filename).extension().string());
      {
        std::ofstream out(path, std::ios::binary);
        out << file.content;
      }
      q.text = field("query");
      q.image = image_ref_from_file(path, optional_number(field("pixel_spacing_mm")), optional_plane(field("plane_hint")),
                                    field("id").empty() ? stem : field("id"));
    } else {
      const auto j = parse_body(req);
      q.text = j.value("query", std::string());
      const auto& img = j.at("image");
      q.image = image_ref_from_file(img.at("path").get<std::string>(),
                                    img.contains("pixel_spacing_mm") ? std::optional(img["pixel_spacing_mm"].get<double>())
                                                                     : std::nullopt,
                                    optional_plane(img.value("plane_hint", std::string())),
                                    img.value("id", std::string()));
    }
    send_report(res, run_image_query(engine, store, q));
  }

  void summarize(const httplib::Request& req, httplib::Response& res) {
    const auto j = parse_body(req);
    Query q;
    q.text = j.value("query", std::string());
    if (j.contains("manifest")) q.video = load_video_manifest(j["manifest"].get<std::string>());
    else if (j.contains("video")) q.video = video_from_manifest(j["video"], std::filesystem::current_path());
    else throw ValidationError("request needs 'manifest' or 'video'");
    send_report(res, run_video_query(engine, store, q));
  }
};

Service::Service(Engine& engine, RunStore& store) : impl_(std::make_unique<Impl>(engine, store)) {}
Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Service::listen() { impl_->server.listen_after_bind(); }
void Service::wait_until_ready() { impl_->server.wait_until_ready(); }
void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace fetal
