#include "fetal/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "fetal/app.hpp"
#include "fetal/errors.hpp"
#include "fetal/metrics.hpp"
#include "fetal/service.hpp"

namespace fetal {

namespace {

struct Options {
  std::string config, out_dir, runs_dir, clock;
  std::string image, query, plane_hint;
  std::optional<double> spacing;
  std::string manifest, task, hc_chart;
  std::string host = "127.0.0.1";
  std::optional<int> port;
};

EngineConfig engine_config(const Options& o) {
  auto cfg = load_config(o.config);
  if (!o.runs_dir.empty()) cfg.runs_dir = std::filesystem::absolute(o.runs_dir);
  if (!o.clock.empty()) cfg.clock = o.clock;
  if (o.port) cfg.port = *o.port;
  return cfg;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
  if (!out) throw Error("cannot write " + p.string());
}

void write_outputs(const Options& o, const RunOutput& r, std::ostream& out) {
  const std::filesystem::path dir(o.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", r.report_json);
  write_file(dir / "report.md", r.report_md);
  write_file(dir / "run.json", canonical_json(r.record) + "\n");
  out << "run " << r.run_id << ": report written to " << dir.string() << "\n";
}

int analyze(const Options& o, std::ostream& out) {
  auto cfg = engine_config(o);
  Query q;
  q.text = o.query;
  q.image = image_ref_from_file(o.image, o.spacing, o.plane_hint.empty() ? std::nullopt : std::optional(parse_plane(o.plane_hint)));
  Engine engine(cfg);
  RunStore store(cfg.runs_dir);
  write_outputs(o, run_image_query(engine, store, q), out);
  return kExitOk;
}

int summarize(const Options& o, std::ostream& out) {
  auto cfg = engine_config(o);
  Query q;
  q.text = o.query;
  q.video = load_video_manifest(o.manifest);
  Engine engine(cfg);
  RunStore store(cfg.runs_dir);
  write_outputs(o, run_video_query(engine, store, q), out);
  return kExitOk;
}

int evaluate(const Options& o, std::ostream& out) {
  const TaskType task = parse_task(o.task);
  std::optional<GrowthChart> chart;
  if (!o.hc_chart.empty()) {
    chart = load_chart(std::filesystem::path(o.hc_chart), Measure::HC);
  } else if (!o.config.empty()) {
    const auto cfg = load_config(o.config);
    if (const auto it = cfg.charts.find(Measure::HC); it != cfg.charts.end()) chart = load_chart(it->second, Measure::HC);
  }
  std::ifstream in(o.manifest);
  if (!in) throw ManifestError("cannot open manifest '" + o.manifest + "'");
  const auto report = evaluate_manifest(in, task, std::filesystem::absolute(o.manifest).parent_path(),
                                        chart ? &*chart : nullptr);
  const std::string table = format_table(report, o.task);
  if (!o.out_dir.empty()) {
    std::filesystem::create_directories(o.out_dir);
    write_file(std::filesystem::path(o.out_dir) / "metrics.json", canonical_json(nlohmann::json(report)) + "\n");
    write_file(std::filesystem::path(o.out_dir) / "metrics.txt", table);
  }
  out << table;
  return kExitOk;
}

Service* g_service = nullptr;

int serve(const Options& o, std::ostream& out) {
  auto cfg = engine_config(o);
  Engine engine(cfg);
  RunStore store(cfg.runs_dir);
  Service service(engine, store);
  const int port = service.bind(o.host, cfg.port);
  out << "listening on " << o.host << ":" << port << std::endl;
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  service.listen();
  g_service = nullptr;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fetal ultrasound multi-agent analysis engine"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--clock", o.clock, "pin the report timestamp (ISO 8601)");

  auto* a = app.add_subcommand("analyze", "analyze one image");
  a->add_option("--image", o.image, "image file (PNG or PGM)")->required();
  a->add_option("--query", o.query, "clinical query text");
  a->add_option("--config", o.config, "engine config JSON")->required();
  a->add_option("--out", o.out_dir, "output directory")->required();
  a->add_option("--spacing", o.spacing, "pixel spacing in mm");
  a->add_option("--plane-hint", o.plane_hint, "plane label hint");
  a->add_option("--runs-dir", o.runs_dir, "run store directory");

  auto* v = app.add_subcommand("summarize-video", "summarize a video stream manifest");
  v->add_option("--manifest", o.manifest, "stream manifest JSON")->required();
  v->add_option("--query", o.query, "clinical query text");
  v->add_option("--config", o.config, "engine config JSON")->required();
  v->add_option("--out", o.out_dir, "output directory")->required();
  v->add_option("--runs-dir", o.runs_dir, "run store directory");

  auto* e = app.add_subcommand("eval", "evaluate a prediction/truth manifest");
  e->add_option("--manifest", o.manifest, "JSON-lines manifest")->required();
  e->add_option("--task", o.task, "task type")->required();
  e->add_option("--config", o.config, "engine config JSON (for the HC chart)");
  e->add_option("--hc-chart", o.hc_chart, "HC growth chart CSV for the validity rate");
  e->add_option("--out", o.out_dir, "output directory");

  auto* s = app.add_subcommand("serve", "run the HTTP service");
  s->add_option("--config", o.config, "engine config JSON")->required();
  s->add_option("--port", o.port, "listen port");
  s->add_option("--host", o.host, "listen address");
  s->add_option("--runs-dir", o.runs_dir, "run store directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    std::ostringstream help_out, help_err;
    const int code = app.exit(pe, help_out, help_err);
    out << help_out.str();
    err << help_err.str();
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*a) return analyze(o, out);
    if (*v) return summarize(o, out);
    if (*e) return evaluate(o, out);
    return serve(o, out);
  } catch (const PlanError& ex) {
    err << "plan error: " << ex.what() << "\n";
    return kExitPlan;
  } catch (const ExpertFailure& ex) {
    err << "expert failure: " << ex.what() << "\n";
    return kExitExpert;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  }
}

}  // namespace fetal
