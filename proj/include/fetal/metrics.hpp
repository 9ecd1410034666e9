#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fetal/domain.hpp"
#include "fetal/growth_charts.hpp"
#include "fetal/mask.hpp"

namespace fetal {

struct MetricReport {
  std::map<std::string, double> values;
  std::size_t n = 0;
  std::map<std::string, std::string> notes;
};

void to_json(nlohmann::json& j, const MetricReport& r);
// Aligned two-column plain-text table.
std::string format_table(const MetricReport& r, std::string_view title = {});

struct ClassificationCase {
  std::string id;
  PlaneLabel truth = PlaneLabel::Other;
  PlaneLabel predicted = PlaneLabel::Other;
  std::optional<ClassDistribution> probs;
};

// Accuracy, macro precision/recall/F1 over every label seen in truth or
// prediction, Cohen's kappa, and macro one-vs-rest AUROC when every case
// carries probabilities.
MetricReport classification_metrics(std::span<const ClassificationCase> cases);

double cohens_kappa(const std::vector<std::vector<std::uint64_t>>& confusion);
// Mann-Whitney AUROC, ties counted one half. nullopt when a class is missing.
std::optional<double> binary_auroc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct SegmentationCase {
  std::string id;
  Mask predicted;
  Mask truth;
};

struct SegmentationScores {
  double dsc = 0, iou = 0, ppv = 0, sens = 0;
  // Absent when exactly one mask is empty.
  std::optional<double> hd95;
  std::optional<double> assd;
};

// Directed boundary-to-boundary distances both ways, pooled. Uses an exact
// Euclidean distance transform of each boundary set.
std::vector<double> pooled_surface_distances(const Mask& a, const Mask& b);
SegmentationScores segmentation_scores(const Mask& predicted, const Mask& truth);
MetricReport segmentation_metrics(std::span<const SegmentationCase> cases);

struct BiometryCase {
  std::string id;
  double predicted = 0;
  double truth = 0;
};

MetricReport biometry_metrics(std::span<const BiometryCase> cases);

struct ValidityCase {
  std::string id;
  double predicted_ga = 0;
  double true_hc = 0;
};

MetricReport validity_rate(std::span<const ValidityCase> cases, const GrowthChart& chart);

// Linear-interpolated quantile, h = (n - 1) q. Input need not be sorted.
double quantile_linear(std::vector<double> values, double q);
// Mean of the middle two for even counts.
double median(std::vector<double> values);

// JSON-lines manifest, one {id, pred, truth} case per line. Masks may be
// inline RLE or {"file": path} relative to base_dir. GA manifests may carry
// "truth_hc" per line; with a chart the validity rate is added.
MetricReport evaluate_manifest(std::istream& in, TaskType task, const std::filesystem::path& base_dir,
                               const GrowthChart* hc_chart = nullptr);

}  // namespace fetal
