#include <doctest.h>

#include <random>
#include <sstream>

#include "fetal/errors.hpp"
#include "fetal/fusion.hpp"
#include "fetal/growth_charts.hpp"
#include "test_support.hpp"

using namespace fetal;

namespace {

const char* kHeader = "ga_weeks,p2.5,p5,p10,p25,p50,p75,p90,p95,p97.5\n";

GrowthChart chart_from(const std::string& text) {
  std::istringstream in(text);
  return load_chart(in, Measure::HC);
}

std::string error_of(const std::string& text) {
  try {
    chart_from(text);
  } catch (const ChartError& e) {
    return e.what();
  }
  return {};
}

const GrowthChart& hc_chart() {
  static const GrowthChart c = load_chart(test::testdata("charts/synthetic_hc.csv"), Measure::HC);
  return c;
}

ExpertResult hc_tool(const std::string& id, double v) {
  ExpertResult r;
  r.tool_id = id;
  r.task = TaskType::HCMeasurement;
  r.payload = BiometryValue{Measure::HC, v, Unit::Millimeters, "ellipse_fit", 1.0};
  return r;
}

FindingsBundle bundle(const std::vector<double>& hc, double ga = 20.0, Unit unit = Unit::Millimeters) {
  FindingsBundle b;
  ExpertResult g;
  g.tool_id = "ga_tool";
  g.task = TaskType::GAEstimation;
  g.payload = BiometryValue{Measure::GA, ga, Unit::Weeks, "regression", 1.0};
  b.per_tool.push_back(g);
  b.fused.push_back(fuse_scalars(std::vector<ExpertResult>{g}));
  std::vector<ExpertResult> tools;
  for (std::size_t i = 0; i < hc.size(); ++i) {
    tools.push_back(hc_tool("hc_" + std::string(1, char('a' + i)), hc[i]));
    std::get<BiometryValue>(*tools.back().payload).unit = unit;
  }
  b.per_tool.insert(b.per_tool.end(), tools.begin(), tools.end());
  b.fused.push_back(fuse_scalars(tools));
  return b;
}

double hc_value(const FindingsBundle& b) { return b.biometry(TaskType::HCMeasurement)->value; }

}  // namespace

TEST_CASE("load_chart examples") {
  const auto c = chart_from(std::string(kHeader) + "20,1,2,3,4,5,6,7,8,9\n21,2,3,4,5,6,7,8,9,10\n");
  CHECK(c.rows().size() == 2);
  CHECK(c.measure() == Measure::HC);
  CHECK(error_of(std::string(kHeader) + "20,1,2,3,4,5,6,7,8,9\n21,2,3,4,6,5,7,8,9,10\n") ==
        "line 3: p50 not above p25");
  CHECK(error_of(std::string(kHeader) + "20,1,2,3,4,5,6,7,8,9\n20,2,3,4,5,6,7,8,9,10\n").find("line 3") !=
        std::string::npos);
  CHECK(error_of(std::string(kHeader) + "21,1,2,3,4,5,6,7,8,9\n20,2,3,4,5,6,7,8,9,10\n").find("line 3") !=
        std::string::npos);
  CHECK(error_of("ga_weeks,p2.5,p5,p10,p25,p50,p75,p90,p95\n20,1,2,3,4,5,6,7,8\n").find("missing column 'p97.5'") !=
        std::string::npos);
  CHECK(error_of(std::string(kHeader) + "20,1,2,x,4,5,6,7,8,9\n").find("line 2: non-numeric") != std::string::npos);
  CHECK(error_of(std::string(kHeader) + "20,1,2,3,4,5,6,7,8\n").find("line 2") != std::string::npos);
  CHECK_FALSE(error_of(kHeader).empty());
  CHECK_THROWS_AS(load_chart(test::testdata("charts/missing.csv"), Measure::HC), ChartError);
}

TEST_CASE("comment lines are skipped") {
  const auto c = chart_from(std::string("# note\n") + kHeader + "# more\n20,1,2,3,4,5,6,7,8,9\n");
  CHECK(c.rows().size() == 1);
}

TEST_CASE("percentile_of examples") {
  const auto& c = hc_chart();
  const auto p50 = percentile_of(c, 20, 180.0);
  CHECK(p50.percentile == 50.0);
  CHECK(p50.in_band_2_5_97_5);
  CHECK_FALSE(p50.clamped);
  const auto low = percentile_of(c, 20, 158.4);
  CHECK(low.percentile == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(low.in_band_2_5_97_5);
  const auto two = chart_from(std::string(kHeader) + "20,10,20,30,40,50,60,70,80,90\n22,12,22,32,42,52,62,72,82,92\n");
  CHECK(percentile_of(two, 20, 45).percentile == doctest::Approx(37.5).epsilon(1e-12));
  CHECK(percentile_of(two, 21, 46).percentile == doctest::Approx(37.5).epsilon(1e-12));
  CHECK(percentile_of(c, 19, c.p50_at(19)).percentile == doctest::Approx(50).epsilon(1e-12));
}

TEST_CASE("percentile tails") {
  const auto& c = hc_chart();
  const auto below = percentile_of(c, 20, 79.2);
  CHECK(below.clamped);
  CHECK_FALSE(below.in_band_2_5_97_5);
  CHECK(below.percentile == doctest::Approx(1.25));
  CHECK(percentile_of(c, 20, 1.0).percentile == 0.1);
  const auto above = percentile_of(c, 20, 201.6 * 1.2);
  CHECK(above.clamped);
  CHECK(above.percentile == doctest::Approx(98.0));
  CHECK(percentile_of(c, 20, 1000).percentile == 99.9);
  CHECK(percentile_of(c, 20, 1000).unclamped > 99.9);
}

TEST_CASE("percentile_of range errors") {
  CHECK_THROWS_AS(percentile_of(hc_chart(), 11.99, 100), RangeError);
  CHECK_THROWS_AS(percentile_of(hc_chart(), 40.01, 100), RangeError);
  CHECK_NOTHROW(percentile_of(hc_chart(), 40, 100));
  CHECK_THROWS_AS(percentile_of(hc_chart(), 20, 0), ValidationError);
}

TEST_CASE("percentile_of is monotone and continuous in value") {
  const auto& c = hc_chart();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(12, 40);
  for (int trial = 0; trial < 40; ++trial) {
    const double ga = U(rng);
    const auto curves = c.curves_at(ga);
    double prev = -1;
    for (double v = curves.front() * 0.5; v <= curves.back() * 1.5; v += 0.05) {
      const double p = percentile_of(c, ga, v).unclamped;
      CHECK(p >= prev);
      prev = p;
    }
    for (std::size_t k = 0; k < curves.size(); ++k) {
      const double at = percentile_of(c, ga, curves[k]).unclamped;
      const double left = percentile_of(c, ga, std::nextafter(curves[k], 0.0)).unclamped;
      const double right = percentile_of(c, ga, std::nextafter(curves[k], 1e9)).unclamped;
      CHECK(std::abs(at - left) <= 1e-9);
      CHECK(std::abs(right - at) <= 1e-9);
      CHECK(std::abs(at - kChartPercentiles[k]) <= 1e-9);
    }
  }
}

TEST_CASE("validity_check examples and property") {
  const auto& c = hc_chart();
  CHECK(validity_check(c, 20, 180));
  CHECK_FALSE(validity_check(c, 20, 150));
  CHECK(validity_check(c, 20, 201.6));
  CHECK_FALSE(validity_check(c, 20, 201.7));
  for (const auto& row : c.rows()) CHECK(validity_check(c, row.ga_weeks, c.p50_at(row.ga_weeks)));
}

TEST_CASE("ga_for_median inverts the p50 curve") {
  CHECK(*hc_chart().ga_for_median(180) == doctest::Approx(20));
  CHECK(*hc_chart().ga_for_median(185) == doctest::Approx(20.5));
  CHECK_FALSE(hc_chart().ga_for_median(50).has_value());
}

TEST_CASE("reflection: plausible fused value triggers nothing") {
  const ChartSet charts{{Measure::HC, hc_chart()}};
  const auto out = reflection_safeguard(bundle({180, 182, 400}), charts);
  CHECK(hc_value(out) == 182);
  CHECK(out.annotations.at("hc.validation") == "validated");
  CHECK_FALSE(out.annotations.contains("hc.reflection_applied"));
}

TEST_CASE("reflection replaces an implausible fused value") {
  const ChartSet charts{{Measure::HC, hc_chart()}};
  const auto in = bundle({400, 405, 182});
  CHECK(hc_value(in) == 400);
  const auto out = reflection_safeguard(in, charts);
  CHECK(hc_value(out) == 182);
  CHECK(out.annotations.at("hc.replaced_by_reflection") == "true");
  CHECK(out.annotations.at("hc.original_value") == "400.0");
  CHECK(out.annotations.at("hc.reflected_value") == "182.0");
  CHECK(out.annotations.at("hc.excluded_tools") == "hc_b");
  CHECK(out.find(TaskType::HCMeasurement)->contributors == std::vector<std::string>{"hc_a", "hc_c"});
  CHECK_NOTHROW(out.validate());
  CHECK(canonical_json(reflection_safeguard(out, charts)) == canonical_json(out));
}

TEST_CASE("reflection keeps the original when exclusion does not help") {
  const ChartSet charts{{Measure::HC, hc_chart()}};
  const auto out = reflection_safeguard(bundle({400, 405, 410}), charts);
  CHECK(hc_value(out) == 405);
  CHECK(out.annotations.at("hc.out_of_band") == "true");
  CHECK_FALSE(out.annotations.contains("hc.replaced_by_reflection"));
  CHECK(canonical_json(reflection_safeguard(out, charts)) == canonical_json(out));
}

TEST_CASE("reflection degraded modes") {
  const auto none = reflection_safeguard(bundle({400, 405, 182}), ChartSet{});
  CHECK(hc_value(none) == 400);
  CHECK(none.annotations.at("hc.validation") == "unvalidated");
  const ChartSet charts{{Measure::HC, hc_chart()}};
  const auto px = reflection_safeguard(bundle({400, 405, 182}, 20, Unit::Pixels), charts);
  CHECK(px.annotations.at("hc.validation") == "uncalibrated");
  const auto out_of_range = reflection_safeguard(bundle({400, 405, 182}, 41), charts);
  CHECK(out_of_range.annotations.at("hc.validation") == "unvalidated");
}

TEST_CASE("reflection property: idempotent and within contributor range") {
  const ChartSet charts{{Measure::HC, hc_chart()}};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(60, 420);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> vals;
    for (int i = 0; i < 1 + int(rng() % 5); ++i) vals.push_back(std::round(U(rng) * 10) / 10);
    const auto once = reflection_safeguard(bundle(vals, 14 + rng() % 26), charts);
    CHECK(canonical_json(reflection_safeguard(once, charts)) == canonical_json(once));
    const double v = hc_value(once);
    CHECK(v >= *std::min_element(vals.begin(), vals.end()));
    CHECK(v <= *std::max_element(vals.begin(), vals.end()));
  }
}
