#include "fetal/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "fetal/errors.hpp"

namespace fetal {

std::string_view to_string(FusionRuleId r) {
  switch (r) {
    case FusionRuleId::WeightedVote:
      return "weighted_vote";
    case FusionRuleId::PixelMajority:
      return "pixel_majority";
    case FusionRuleId::ScalarMedian:
      return "scalar_median";
    case FusionRuleId::BestConfidence:
      return "best_confidence";
  }
  return "?";
}

FusionRuleId parse_fusion_rule(std::string_view s) {
  for (auto r : {FusionRuleId::WeightedVote, FusionRuleId::PixelMajority, FusionRuleId::ScalarMedian,
                 FusionRuleId::BestConfidence})
    if (to_string(r) == s) return r;
  throw ValidationError("unknown fusion rule '" + std::string(s) + "'");
}

FusionRuleId default_rule_for(TaskType task) {
  switch (task) {
    case TaskType::HeadSegmentation:
    case TaskType::AbdomenSegmentation:
    case TaskType::StomachSegmentation:
      return FusionRuleId::PixelMajority;
    case TaskType::HCMeasurement:
    case TaskType::ACMeasurement:
    case TaskType::AoP:
    case TaskType::GAEstimation:
      return FusionRuleId::ScalarMedian;
    default:
      return FusionRuleId::WeightedVote;
  }
}

namespace {

// Ok-status results in a canonical order so every reduction below is
// independent of the caller's ordering.
std::vector<const ExpertResult*> survivors(std::span<const ExpertResult> results) {
  std::vector<std::pair<std::string, const ExpertResult*>> keyed;
  for (const auto& r : results) {
    if (!r.ok() || !r.payload) continue;
    keyed.emplace_back(canonical_json(nlohmann::json(r)), &r);
  }
  if (keyed.empty()) throw FusionError("no successful tool results to fuse");
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.second->tool_id != b.second->tool_id) return a.second->tool_id < b.second->tool_id;
    return a.first < b.first;
  });
  std::vector<const ExpertResult*> out;
  out.reserve(keyed.size());
  for (const auto& [_, r] : keyed) out.push_back(r);
  return out;
}

double weight_of(const WeightMap& weights, const std::string& tool_id) {
  auto it = weights.find(tool_id);
  const double w = it == weights.end() ? 1.0 : it->second;
  if (!(w > 0.0) || !std::isfinite(w)) throw FusionError("fusion weight for '" + tool_id + "' must be positive");
  return w;
}

std::vector<std::string> contributor_ids(const std::vector<const ExpertResult*>& rs) {
  std::vector<std::string> ids;
  for (const auto* r : rs) ids.push_back(r->tool_id);
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

template <typename T>
const T& payload_as(const ExpertResult& r, const char* rule) {
  const auto* p = std::get_if<T>(&*r.payload);
  if (!p)
    throw FusionError(std::string(rule) + " cannot fuse a " + std::string(to_string(kind_of(*r.payload))) +
                      " payload from '" + r.tool_id + "'");
  return *p;
}

TaskType common_task(const std::vector<const ExpertResult*>& rs) {
  for (const auto* r : rs)
    if (r->task != rs.front()->task) throw FusionError("cannot fuse results from different tasks");
  return rs.front()->task;
}

constexpr double kTieTolerance = 1e-12;

}  // namespace

FusedClassification fuse_classification_detailed(std::span<const ExpertResult> results, const WeightMap& weights) {
  const auto rs = survivors(results);
  double total_weight = 0;
  for (const auto* r : rs) total_weight += weight_of(weights, r->tool_id);

  std::map<PlaneLabel, double> mass;
  std::map<PlaneLabel, std::pair<double, int>> voter_confidence;
  for (const auto* r : rs) {
    const auto& dist = payload_as<ClassDistribution>(*r, "weighted_vote");
    const double w = weight_of(weights, r->tool_id) / total_weight;
    for (const auto& [label, p] : dist.probs()) mass[label] += w * r->confidence * p;
    auto& vc = voter_confidence[dist.argmax()];
    vc.first += r->confidence;
    vc.second += 1;
  }
  double sum = 0;
  for (const auto& [_, m] : mass) sum += m;
  if (!(sum > 0)) {
    // Every tool reported zero confidence: fall back to the plain weighted mean.
    mass.clear();
    for (const auto* r : rs) {
      const double w = weight_of(weights, r->tool_id) / total_weight;
      for (const auto& [label, p] : std::get<ClassDistribution>(*r->payload).probs()) mass[label] += w * p;
    }
  }
  const ClassDistribution fused = ClassDistribution::normalized(mass);

  auto mean_conf = [&](PlaneLabel l) {
    auto it = voter_confidence.find(l);
    return it == voter_confidence.end() ? 0.0 : it->second.first / it->second.second;
  };
  const auto& probs = fused.probs();
  PlaneLabel best = probs.begin()->first;
  for (const auto& [label, p] : probs) {
    if (label == best) continue;
    const double bp = probs.at(best);
    if (p > bp + kTieTolerance) {
      best = label;
    } else if (std::abs(p - bp) <= kTieTolerance) {
      const double ca = mean_conf(label), cb = mean_conf(best);
      if (ca > cb || (ca == cb && to_string(label) < to_string(best))) best = label;
    }
  }

  FusedClassification out;
  out.result.task = common_task(rs);
  out.result.payload = fused;
  out.result.contributors = contributor_ids(rs);
  out.result.fusion_rule = std::string(to_string(FusionRuleId::WeightedVote));
  out.label = best;
  out.probability = fused.prob(best);
  return out;
}

FusedResult fuse_classification(std::span<const ExpertResult> results, const WeightMap& weights) {
  return fuse_classification_detailed(results, weights).result;
}

FusedResult fuse_masks(std::span<const ExpertResult> results, const WeightMap& weights) {
  const auto rs = survivors(results);
  const Mask& first = payload_as<Mask>(*rs.front(), "pixel_majority");
  std::vector<double> w;
  double total = 0;
  struct Event {
    std::uint64_t pos;
    std::size_t tool;
    bool enter;
  };
  std::vector<Event> events;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const Mask& m = payload_as<Mask>(*rs[i], "pixel_majority");
    if (!m.same_dims(first)) throw FusionError("mask dimensions differ between tools");
    w.push_back(weight_of(weights, rs[i]->tool_id));
    total += w.back();
    for (const auto& run : m.runs()) {
      events.push_back({run.start, i, true});
      events.push_back({run.start + run.length, i, false});
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.pos < b.pos; });

  std::vector<char> active(rs.size(), 0);
  std::vector<Mask::Run> runs;
  bool inside = false;
  std::size_t i = 0;
  while (i < events.size()) {
    const std::uint64_t pos = events[i].pos;
    while (i < events.size() && events[i].pos == pos) {
      active[events[i].tool] = events[i].enter ? 1 : 0;
      ++i;
    }
    // Summed in canonical tool order so the threshold test is order-free.
    double covered = 0;
    for (std::size_t t = 0; t < rs.size(); ++t)
      if (active[t]) covered += w[t];
    const bool now = covered > 0.5 * total;
    if (now && !inside) runs.push_back({pos, 0});
    if (!now && inside) runs.back().length = pos - runs.back().start;
    inside = now;
  }

  FusedResult out;
  out.task = common_task(rs);
  out.payload = Mask::from_runs(first.width(), first.height(), std::move(runs));
  out.contributors = contributor_ids(rs);
  out.fusion_rule = std::string(to_string(FusionRuleId::PixelMajority));
  return out;
}

FusedResult fuse_scalars(std::span<const ExpertResult> results) {
  auto rs = survivors(results);
  const auto& ref = payload_as<BiometryValue>(*rs.front(), "scalar_median");
  double conf = 0;
  for (const auto* r : rs) {
    const auto& b = payload_as<BiometryValue>(*r, "scalar_median");
    if (b.measure != ref.measure || b.unit != ref.unit) throw FusionError("cannot fuse mixed measures or units");
    conf += b.confidence;
  }
  const auto contributors = contributor_ids(rs);
  std::stable_sort(rs.begin(), rs.end(), [](const ExpertResult* a, const ExpertResult* b) {
    return std::get<BiometryValue>(*a->payload).value < std::get<BiometryValue>(*b->payload).value;
  });
  BiometryValue median = std::get<BiometryValue>(*rs[(rs.size() - 1) / 2]->payload);
  median.confidence = conf / static_cast<double>(rs.size());

  FusedResult out;
  out.task = common_task(rs);
  out.payload = median;
  out.contributors = contributors;
  out.fusion_rule = std::string(to_string(FusionRuleId::ScalarMedian));
  return out;
}

FusedResult fuse_best_confidence(std::span<const ExpertResult> results) {
  const auto rs = survivors(results);
  const ExpertResult* best = rs.front();
  for (const auto* r : rs)
    if (r->confidence > best->confidence) best = r;
  FusedResult out;
  out.task = common_task(rs);
  out.payload = *best->payload;
  out.contributors = {best->tool_id};
  out.fusion_rule = std::string(to_string(FusionRuleId::BestConfidence));
  return out;
}

FusedResult fuse(FusionRuleId rule, std::span<const ExpertResult> results, const WeightMap& weights) {
  switch (rule) {
    case FusionRuleId::WeightedVote:
      return fuse_classification(results, weights);
    case FusionRuleId::PixelMajority:
      return fuse_masks(results, weights);
    case FusionRuleId::ScalarMedian:
      return fuse_scalars(results);
    case FusionRuleId::BestConfidence:
      return fuse_best_confidence(results);
  }
  throw FusionError("unknown fusion rule");
}

}  // namespace fetal
