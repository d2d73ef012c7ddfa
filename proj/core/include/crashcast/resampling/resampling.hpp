#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/labeled_set.hpp"

namespace crashcast::resampling {

using ClassTargets = std::map<int, std::size_t>;

// Reference strategies: majority class cut to 15,000, then Moderate, Serious and
// Fatal synthesized up to 15,000 / 10,000 / 5,000.
ClassTargets reference_under_strategy();
ClassTargets reference_over_strategy();

// Uniform subsample without replacement of every listed class down to its
// target; rows keep their input order. Throws kTargetExceedsCount.
LabeledSet random_undersample(const LabeledSet& data, const ClassTargets& targets, std::uint64_t seed);

// Parent rows (input indices) of each synthetic row, in output order.
using SmoteParents = std::vector<std::pair<std::size_t, std::size_t>>;

// Originals first in input order, then synthetics class by class. For each
// synthetic: a uniformly chosen member x, one of its k nearest same-class
// neighbors x_n (exact Euclidean, index order on ties), and x + u*(x_n - x).
// Coordinates missing in either parent are copied from x. Throws
// kTooFewSamplesForK (class needs synthetics but has <= k members) and
// kInvalidArgument (target below the current count).
LabeledSet smote_oversample(const LabeledSet& data, const ClassTargets& targets, std::size_t k, std::uint64_t seed,
                            SmoteParents* parents = nullptr);

struct ResampleReport {
  std::map<int, std::size_t> before;
  std::map<int, std::size_t> after;
  std::map<int, std::size_t> removed;
  std::map<int, std::size_t> synthetic_count;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const ResampleReport& report);
ClassTargets class_targets_from_json(const nlohmann::json& doc);  // {"0": 15000, ...}

std::pair<LabeledSet, ResampleReport> two_stage_balance(const LabeledSet& data, const ClassTargets& under,
                                                        const ClassTargets& over, std::uint64_t seed,
                                                        std::size_t k = 5);

}  // namespace crashcast::resampling
