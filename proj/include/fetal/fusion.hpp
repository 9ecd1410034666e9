#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

#include "fetal/domain.hpp"

namespace fetal {

enum class FusionRuleId { WeightedVote, PixelMajority, ScalarMedian, BestConfidence };

std::string_view to_string(FusionRuleId r);
FusionRuleId parse_fusion_rule(std::string_view s);
// The rule used when an expert config does not name one.
FusionRuleId default_rule_for(TaskType task);

// tool_id -> positive weight; missing tools weigh 1.0.
using WeightMap = std::map<std::string, double>;

struct FusedClassification {
  FusedResult result;
  PlaneLabel label = PlaneLabel::Other;
  double probability = 0.0;
};

// Weighted, confidence-scaled average of the tool distributions. The label is
// the argmax; ties go to the higher mean confidence among tools voting for
// the label, then to the lexicographically smaller label name.
FusedClassification fuse_classification_detailed(std::span<const ExpertResult> results, const WeightMap& weights = {});
FusedResult fuse_classification(std::span<const ExpertResult> results, const WeightMap& weights = {});

// A pixel is foreground iff the weight of tools marking it exceeds half the
// total weight (strict).
FusedResult fuse_masks(std::span<const ExpertResult> results, const WeightMap& weights = {});

// Lower median of the values; confidence is the mean over contributors.
FusedResult fuse_scalars(std::span<const ExpertResult> results);

// The single most confident result, ties to the smaller tool_id.
FusedResult fuse_best_confidence(std::span<const ExpertResult> results);

// Error-status results are dropped first; throws FusionError when none
// survive or when the payloads do not suit the rule.
FusedResult fuse(FusionRuleId rule, std::span<const ExpertResult> results, const WeightMap& weights = {});

}  // namespace fetal
