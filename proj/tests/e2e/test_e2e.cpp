#include <doctest.h>

#include "e2e/golden.hpp"
#include "fetal/summarizer.hpp"

using namespace fetal;
using namespace fetal::test;
namespace fs = std::filesystem;

TEST_CASE("CLI reports match the checked-in goldens byte for byte") {
  const auto spec = golden_spec();
  REQUIRE(spec.cases.size() == 6);
  const auto dir = scratch("e2e_cli");
  for (const auto& c : spec.cases) {
    CAPTURE(c.name);
    const auto out = run_golden_case(spec, c, dir);
    REQUIRE_MESSAGE(out.code == 0, out.err);
    CHECK(out.report_json == slurp(e2e_dir() / "golden" / (c.name + ".report.json")));
    CHECK(out.report_md == slurp(e2e_dir() / "golden" / (c.name + ".report.md")));
    const auto report = nlohmann::json::parse(out.report_json).get<Report>();
    CHECK(untraceable_numbers(report).empty());
    CHECK(out.report_json.find(source_dir().string()) == std::string::npos);
  }
}

TEST_CASE("goldens carry the expected headline findings") {
  const auto load = [](const std::string& name) {
    return nlohmann::json::parse(slurp(e2e_dir() / "golden" / (name + ".report.json"))).get<Report>();
  };
  const auto hc = load("analyze_brain_caption");
  CHECK(hc.section("Plane")->payload["plane"] == "brain");
  CHECK(hc.section("Biometry")->payload["items"][0]["measure"] == "hc");
  CHECK(hc.section("Consistency")->payload["consistent"] == true);

  const auto aop = load("analyze_cervix_aop");
  const auto& item = aop.section("Biometry")->payload["items"][0];
  CHECK(item["measure"] == "aop");
  // Symphysis bar y 58..62 ending at x 70, head disk (130, 80) r 30: analytic 46.7 degrees.
  CHECK(item["value"].get<double>() == doctest::Approx(46.7).epsilon(0.01));
  CHECK(aop.section("Biometry")->body == "- AoP: 46.55 degrees.");

  const auto video = load("video_planted");
  CHECK(video.kind == ReportKind::VideoSummary);
  const auto nonkey = load("video_nonkey");
  CHECK(nonkey.has_flag("no_diagnostic_keyframes"));
}

TEST_CASE("service responses equal CLI reports") {
  const auto spec = golden_spec();
  RunningService svc(golden_engine_config(spec), scratch("e2e_service_runs"));
  auto client = svc.client();
  for (const auto& c : spec.cases) {
    CAPTURE(c.name);
    const auto [path, body] = service_request(c);
    const auto res = client.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == slurp(e2e_dir() / "golden" / (c.name + ".report.json")));
  }
}

TEST_CASE("CLI exit codes") {
  const auto dir = scratch("e2e_exit");
  ScopedCwd cwd(e2e_dir());
  const auto out = (dir / "out").string();
  const auto runs = (dir / "runs").string();
  const auto analyze = [&](const std::string& image, const std::string& config, const std::string& query) {
    return cli({"analyze", "--image", image, "--query", query, "--config", config, "--out", out, "--runs-dir", runs});
  };
  // Without spacing the ellipse tools report pixels and cannot fuse with a mm tool.
  CHECK(analyze("images/brain_01.png", "config.json", "Describe this image").code == kExitExpert);
  CHECK(analyze("images/missing.png", "config.json", "").code == kExitInput);
  CHECK(analyze("images/brain_01.png", "missing.json", "").code == kExitInput);
  const auto plan = analyze("images/brain_01.png", "config_minimal.json", "What is the head circumference?");
  CHECK(plan.code == kExitPlan);
  CHECK(plan.err.find("hc_measurement") != std::string::npos);
  CHECK(analyze("images/brain_01.png", "config_failing.json", "What is the head circumference?").code == kExitExpert);
  CHECK(cli({"summarize-video", "--manifest", "video_empty.json", "--config", "config.json", "--out", out,
             "--runs-dir", runs})
            .code == kExitInput);
  CHECK(cli({"bogus-subcommand"}).code == kExitInput);
  CHECK(cli({"analyze", "--image", "images/brain_01.png"}).code == kExitInput);
}

TEST_CASE("eval subcommand") {
  ScopedCwd cwd(testdata("eval"));
  const auto kappa = cli({"eval", "--manifest", "kappa_0_6.jsonl", "--task", "plane_classification"});
  CHECK(kappa.code == kExitOk);
  CHECK(kappa.out.find("kappa      0.600000") != std::string::npos);
  CHECK(kappa.out.find("accuracy   0.800000") != std::string::npos);

  const auto dir = scratch("e2e_eval");
  const auto seg = cli({"eval", "--manifest", "seg_identical.jsonl", "--task", "head_segmentation", "--out",
                        dir.string()});
  CHECK(seg.code == kExitOk);
  CHECK(seg.out.find("dsc     1.000000") != std::string::npos);
  const auto metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
  CHECK(metrics.dump().find("\"dsc\"") != std::string::npos);

  const auto bad = cli({"eval", "--manifest", "malformed.jsonl", "--task", "plane_classification"});
  CHECK(bad.code == kExitInput);
  CHECK(bad.err.find("line 2") != std::string::npos);
  CHECK(cli({"eval", "--manifest", "missing.jsonl", "--task", "plane_classification"}).code == kExitInput);
}
