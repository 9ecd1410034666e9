#include "fetal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "fetal/errors.hpp"
#include "fetal/mask_geometry.hpp"

namespace fetal {

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"metrics", r.values}, {"n", r.n}};
  if (!r.notes.empty()) j["notes"] = r.notes;
}

std::string format_table(const MetricReport& r, std::string_view title) {
  std::size_t width = 6;
  for (const auto& [k, _] : r.values) width = std::max(width, k.size());
  for (const auto& [k, _] : r.notes) width = std::max(width, k.size());
  std::ostringstream out;
  if (!title.empty()) out << title << "\n";
  out << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
  out << std::string(width, '-') << "  " << std::string(12, '-') << "\n";
  out << std::setw(static_cast<int>(width)) << "n" << "  " << r.n << "\n";
  for (const auto& [k, v] : r.values)
    out << std::setw(static_cast<int>(width)) << k << "  " << std::fixed << std::setprecision(6) << v << "\n";
  for (const auto& [k, v] : r.notes) out << std::setw(static_cast<int>(width)) << k << "  " << v << "\n";
  return out.str();
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---- classification --------------------------------------------------------

double cohens_kappa(const std::vector<std::vector<std::uint64_t>>& confusion) {
  // (n*agree - sum r_i c_i) / (n^2 - sum r_i c_i) in exact integers, one rounding.
  __extension__ using Wide = unsigned __int128;
  const std::size_t k = confusion.size();
  Wide n = 0, agree = 0;
  std::vector<Wide> rows(k, 0), cols(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const Wide c = confusion[i][j];
      n += c;
      rows[i] += c;
      cols[j] += c;
      if (i == j) agree += c;
    }
  }
  if (n == 0) throw ValidationError("kappa of an empty confusion matrix");
  Wide chance = 0;
  for (std::size_t i = 0; i < k; ++i) chance += rows[i] * cols[i];
  // Chance agreement of 1 only happens when both raters use a single label.
  if (chance == n * n) return agree == n ? 1.0 : 0.0;
  const double num = n * agree >= chance ? static_cast<double>(n * agree - chance)
                                         : -static_cast<double>(chance - n * agree);
  return num / static_cast<double>(n * n - chance);
}

std::optional<double> binary_auroc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0, npos = 0, nneg = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) {
        pos_rank_sum += mid_rank;
        ++npos;
      } else {
        ++nneg;
      }
    }
    i = j;
  }
  if (npos == 0 || nneg == 0) return std::nullopt;
  return (pos_rank_sum - npos * (npos + 1) / 2.0) / (npos * nneg);
}

MetricReport classification_metrics(std::span<const ClassificationCase> cases) {
  if (cases.empty()) throw ManifestError("classification metrics need at least one case");
  std::set<PlaneLabel> label_set;
  for (const auto& c : cases) {
    label_set.insert(c.truth);
    label_set.insert(c.predicted);
  }
  const std::vector<PlaneLabel> labels(label_set.begin(), label_set.end());
  auto index_of = [&](PlaneLabel l) {
    return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), l) - labels.begin());
  };
  const std::size_t k = labels.size();
  std::vector<std::vector<std::uint64_t>> confusion(k, std::vector<std::uint64_t>(k, 0));
  for (const auto& c : cases) ++confusion[index_of(c.truth)][index_of(c.predicted)];

  const double n = static_cast<double>(cases.size());
  double correct = 0, p_sum = 0, r_sum = 0, f_sum = 0;
  for (std::size_t i = 0; i < k; ++i) {
    correct += static_cast<double>(confusion[i][i]);
    double predicted = 0, actual = 0;
    for (std::size_t j = 0; j < k; ++j) {
      predicted += static_cast<double>(confusion[j][i]);
      actual += static_cast<double>(confusion[i][j]);
    }
    const double tp = static_cast<double>(confusion[i][i]);
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = actual > 0 ? tp / actual : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    p_sum += precision;
    r_sum += recall;
    f_sum += f1;
  }

  MetricReport r;
  r.n = cases.size();
  r.values["accuracy"] = correct / n;
  r.values["precision"] = p_sum / static_cast<double>(k);
  r.values["recall"] = r_sum / static_cast<double>(k);
  r.values["f1"] = f_sum / static_cast<double>(k);
  r.values["kappa"] = cohens_kappa(confusion);

  const bool have_probs = std::all_of(cases.begin(), cases.end(), [](const auto& c) { return c.probs.has_value(); });
  if (have_probs) {
    double auc_sum = 0;
    std::size_t defined = 0;
    for (PlaneLabel l : labels) {
      std::vector<double> scores;
      std::vector<std::uint8_t> pos;
      for (const auto& c : cases) {
        scores.push_back(c.probs->prob(l));
        pos.push_back(c.truth == l ? 1 : 0);
      }
      if (auto auc = binary_auroc(scores, pos)) {
        auc_sum += *auc;
        ++defined;
      }
    }
    if (defined > 0) {
      r.values["auroc"] = auc_sum / static_cast<double>(defined);
      r.notes["auroc_classes"] = std::to_string(defined);
    } else {
      r.notes["auroc"] = "undefined (no class has both positives and negatives)";
    }
  } else {
    r.notes["auroc"] = "omitted (predictions without probabilities)";
  }
  return r;
}

// ---- segmentation ---------------------------------------------------------

namespace {

constexpr double kFar = 1e20;

// Squared distance transform of a sampled function along one line.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -kFar;
  z[1] = kFar;
  for (int q = 1; q < n; ++q) {
    double s = 0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kFar;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = double(q) - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

// Exact squared Euclidean distance from every pixel to the nearest seed.
std::vector<double> squared_edt(std::uint32_t w, std::uint32_t h, const std::vector<Point2>& seeds) {
  std::vector<double> grid(std::size_t{w} * h, kFar);
  for (const auto& s : seeds) grid[std::size_t(s.y) * w + std::size_t(s.x)] = 0.0;
  const std::size_t n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (std::uint32_t x = 0; x < w; ++x) {
    f.resize(h);
    d.resize(h);
    for (std::uint32_t y = 0; y < h; ++y) f[y] = grid[std::size_t{y} * w + x];
    edt_1d(f, d, v, z);
    for (std::uint32_t y = 0; y < h; ++y) grid[std::size_t{y} * w + x] = d[y];
  }
  for (std::uint32_t y = 0; y < h; ++y) {
    f.assign(grid.begin() + std::ptrdiff_t(std::size_t{y} * w), grid.begin() + std::ptrdiff_t(std::size_t{y} * w + w));
    d.resize(w);
    edt_1d(f, d, v, z);
    std::copy(d.begin(), d.end(), grid.begin() + std::ptrdiff_t(std::size_t{y} * w));
  }
  return grid;
}

}  // namespace

std::vector<double> pooled_surface_distances(const Mask& a, const Mask& b) {
  if (!a.same_dims(b)) throw DimensionError("mask dimensions differ");
  const auto ba = boundary_points(a);
  const auto bb = boundary_points(b);
  const auto to_b = squared_edt(b.width(), b.height(), bb);
  const auto to_a = squared_edt(a.width(), a.height(), ba);
  std::vector<double> out;
  out.reserve(ba.size() + bb.size());
  for (const auto& p : ba) out.push_back(std::sqrt(to_b[std::size_t(p.y) * b.width() + std::size_t(p.x)]));
  for (const auto& p : bb) out.push_back(std::sqrt(to_a[std::size_t(p.y) * a.width() + std::size_t(p.x)]));
  return out;
}

SegmentationScores segmentation_scores(const Mask& predicted, const Mask& truth) {
  if (!predicted.same_dims(truth)) throw DimensionError("mask dimensions differ");
  SegmentationScores s;
  const double a = static_cast<double>(predicted.area());
  const double b = static_cast<double>(truth.area());
  if (a == 0 && b == 0) {
    s.dsc = s.iou = s.ppv = s.sens = 1.0;
    s.hd95 = 0.0;
    s.assd = 0.0;
    return s;
  }
  const double inter = static_cast<double>(mask_intersection(predicted, truth).area());
  s.dsc = 2 * inter / (a + b);
  s.iou = inter / (a + b - inter);
  s.ppv = a > 0 ? inter / a : 0.0;
  s.sens = b > 0 ? inter / b : 0.0;
  if (a > 0 && b > 0) {
    auto d = pooled_surface_distances(predicted, truth);
    s.assd = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    s.hd95 = quantile_linear(std::move(d), 0.95);
  }
  return s;
}

MetricReport segmentation_metrics(std::span<const SegmentationCase> cases) {
  if (cases.empty()) throw ManifestError("segmentation metrics need at least one case");
  double dsc = 0, iou = 0, ppv = 0, sens = 0, hd = 0, assd = 0;
  std::size_t with_distance = 0;
  for (const auto& c : cases) {
    const auto s = segmentation_scores(c.predicted, c.truth);
    dsc += s.dsc;
    iou += s.iou;
    ppv += s.ppv;
    sens += s.sens;
    if (s.hd95) {
      hd += *s.hd95;
      assd += *s.assd;
      ++with_distance;
    }
  }
  const double n = static_cast<double>(cases.size());
  MetricReport r;
  r.n = cases.size();
  r.values["dsc"] = dsc / n;
  r.values["iou"] = iou / n;
  r.values["ppv"] = ppv / n;
  r.values["sens"] = sens / n;
  if (with_distance > 0) {
    r.values["hd95"] = hd / static_cast<double>(with_distance);
    r.values["assd"] = assd / static_cast<double>(with_distance);
  }
  if (with_distance < cases.size())
    r.notes["distance_excluded"] = std::to_string(cases.size() - with_distance) + " case(s) with exactly one empty mask";
  return r;
}

// ---- biometry -------------------------------------------------------------

MetricReport biometry_metrics(std::span<const BiometryCase> cases) {
  if (cases.empty()) throw ManifestError("biometry metrics need at least one case");
  std::vector<double> abs_err, rel_err;
  std::size_t within = 0;
  for (const auto& c : cases) {
    if (!(c.truth > 0)) throw ValidationError("case '" + c.id + "': truth must be positive for relative errors");
    const double ae = std::abs(c.predicted - c.truth);
    const double re = ae / c.truth;
    abs_err.push_back(ae);
    rel_err.push_back(re);
    if (re <= 0.05) ++within;
  }
  const double n = static_cast<double>(cases.size());
  MetricReport r;
  r.n = cases.size();
  r.values["mae"] = std::accumulate(abs_err.begin(), abs_err.end(), 0.0) / n;
  r.values["mdae"] = median(abs_err);
  r.values["mrae"] = std::accumulate(rel_err.begin(), rel_err.end(), 0.0) / n;
  r.values["mdrae"] = median(rel_err);
  r.values["p95ae"] = quantile_linear(abs_err, 0.95);
  r.values["p95rae"] = quantile_linear(rel_err, 0.95);
  r.values["acc_at_5pct"] = static_cast<double>(within) / n;
  return r;
}

MetricReport validity_rate(std::span<const ValidityCase> cases, const GrowthChart& chart) {
  if (cases.empty()) throw ManifestError("validity rate needs at least one case");
  std::size_t valid = 0, out_of_range = 0;
  for (const auto& c : cases) {
    if (!chart.covers(c.predicted_ga)) {
      ++out_of_range;
      continue;
    }
    if (validity_check(chart, c.predicted_ga, c.true_hc)) ++valid;
  }
  MetricReport r;
  r.n = cases.size();
  r.values["validity_rate"] = static_cast<double>(valid) / static_cast<double>(cases.size());
  if (out_of_range > 0) r.notes["validity_out_of_range"] = std::to_string(out_of_range) + " case(s) counted invalid";
  return r;
}

// ---- manifests ------------------------------------------------------------

namespace {

Mask load_mask_ref(const nlohmann::json& j, const std::filesystem::path& base) {
  if (j.is_object() && j.contains("file")) {
    std::filesystem::path p = j["file"].get<std::string>();
    if (p.is_relative()) p = base / p;
    std::ifstream in(p);
    if (!in) throw ValidationError("cannot open mask file '" + p.string() + "'");
    return nlohmann::json::parse(in).get<Mask>();
  }
  return j.get<Mask>();
}

void parse_classification(const nlohmann::json& pred, ClassificationCase& c) {
  if (pred.is_string()) {
    c.predicted = parse_plane(pred.get<std::string>());
    return;
  }
  if (pred.contains("probs")) c.probs = pred["probs"].get<ClassDistribution>();
  if (pred.contains("label")) c.predicted = parse_plane(pred["label"].get<std::string>());
  else if (c.probs) c.predicted = c.probs->argmax();
  else throw ValidationError("classification prediction needs a label or probs");
}

}  // namespace

MetricReport evaluate_manifest(std::istream& in, TaskType task, const std::filesystem::path& base_dir,
                               const GrowthChart* hc_chart) {
  std::vector<ClassificationCase> cls;
  std::vector<SegmentationCase> seg;
  std::vector<BiometryCase> bio;
  std::vector<ValidityCase> val;
  bool all_have_hc = true;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("id").get<std::string>();
      if (!ids.insert(id).second) throw ValidationError("duplicate id '" + id + "'");
      const auto& pred = j.at("pred");
      const auto& truth = j.at("truth");
      switch (task) {
        case TaskType::PlaneClassification:
        case TaskType::BrainSubplaneClassification: {
          ClassificationCase c;
          c.id = id;
          c.truth = parse_plane(truth.get<std::string>());
          parse_classification(pred, c);
          cls.push_back(std::move(c));
          break;
        }
        case TaskType::HeadSegmentation:
        case TaskType::AbdomenSegmentation:
        case TaskType::StomachSegmentation: {
          SegmentationCase c{id, load_mask_ref(pred, base_dir), load_mask_ref(truth, base_dir)};
          if (!c.predicted.same_dims(c.truth)) throw ValidationError("mask dimensions differ");
          seg.push_back(std::move(c));
          break;
        }
        case TaskType::HCMeasurement:
        case TaskType::ACMeasurement:
        case TaskType::AoP:
        case TaskType::GAEstimation: {
          BiometryCase c{id, pred.get<double>(), truth.get<double>()};
          if (!(c.truth > 0)) throw ValidationError("truth must be positive");
          bio.push_back(c);
          if (task == TaskType::GAEstimation) {
            if (j.contains("truth_hc")) val.push_back({id, c.predicted, j["truth_hc"].get<double>()});
            else all_have_hc = false;
          }
          break;
        }
        default:
          throw ManifestError("task '" + std::string(to_string(task)) + "' has no evaluation metrics");
      }
    } catch (const ManifestError&) {
      throw;
    } catch (const std::exception& e) {
      throw ManifestError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (ids.empty()) throw ManifestError("manifest has no cases");

  switch (task) {
    case TaskType::PlaneClassification:
    case TaskType::BrainSubplaneClassification:
      return classification_metrics(cls);
    case TaskType::HeadSegmentation:
    case TaskType::AbdomenSegmentation:
    case TaskType::StomachSegmentation:
      return segmentation_metrics(seg);
    default: {
      MetricReport r = biometry_metrics(bio);
      if (task == TaskType::GAEstimation && hc_chart) {
        if (!all_have_hc) {
          r.notes["validity_rate"] = "omitted (some cases lack truth_hc)";
        } else {
          const MetricReport v = validity_rate(val, *hc_chart);
          r.values.insert(v.values.begin(), v.values.end());
          r.notes.insert(v.notes.begin(), v.notes.end());
        }
      }
      return r;
    }
  }
}

}  // namespace fetal
