#include "crashcast/resampling/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "crashcast/error.hpp"

namespace crashcast::resampling {

namespace {

std::mt19937_64 class_rng(std::uint64_t seed, int label, std::uint32_t stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(label), stage};
  return std::mt19937_64(seq);
}

// Squared distance over coordinates observed in both rows.
double distance2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) continue;
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::map<int, std::vector<std::size_t>> rows_by_class(const LabeledSet& data) {
  std::map<int, std::vector<std::size_t>> m;
  for (std::size_t i = 0; i < data.size(); ++i) m[data.y[i]].push_back(i);
  return m;
}

}  // namespace

ClassTargets reference_under_strategy() { return {{0, 15000}, {1, 13364}, {2, 2159}, {3, 601}}; }
ClassTargets reference_over_strategy() { return {{1, 15000}, {2, 10000}, {3, 5000}}; }

LabeledSet random_undersample(const LabeledSet& data, const ClassTargets& targets, std::uint64_t seed) {
  auto by_class = rows_by_class(data);
  for (const auto& [label, target] : targets) {
    const std::size_t have = by_class.count(label) ? by_class[label].size() : 0;
    if (target > have) {
      throw Error(ErrorCode::kTargetExceedsCount, "class " + std::to_string(label) + " has " + std::to_string(have) +
                                                      " rows, target " + std::to_string(target));
    }
  }
  std::vector<std::size_t> keep;
  keep.reserve(data.size());
  for (auto& [label, rows] : by_class) {
    auto it = targets.find(label);
    if (it == targets.end() || it->second == rows.size()) {
      keep.insert(keep.end(), rows.begin(), rows.end());
      continue;
    }
    auto rng = class_rng(seed, label, 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    keep.insert(keep.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(it->second));
  }
  std::sort(keep.begin(), keep.end());
  return data.subset(keep);
}

LabeledSet smote_oversample(const LabeledSet& data, const ClassTargets& targets, std::size_t k, std::uint64_t seed,
                            SmoteParents* parents) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  const auto by_class = rows_by_class(data);
  for (const auto& [label, target] : targets) {
    auto it = by_class.find(label);
    const std::size_t have = it == by_class.end() ? 0 : it->second.size();
    if (target < have) {
      throw Error(ErrorCode::kInvalidArgument,
                  "over-sampling target below current count for class " + std::to_string(label));
    }
    if (target > have && have < k + 1) {
      throw Error(ErrorCode::kTooFewSamplesForK, "class " + std::to_string(label) + " has " + std::to_string(have) +
                                                     " rows, need at least " + std::to_string(k + 1));
    }
  }

  LabeledSet out = data;
  if (parents) parents->clear();
  std::vector<double> synthetic(data.x.cols());
  for (const auto& [label, target] : targets) {
    auto cit = by_class.find(label);
    if (cit == by_class.end() || target == cit->second.size()) continue;
    const auto& members = cit->second;
    const std::size_t needed = target - members.size();
    auto rng = class_rng(seed, label, 1);
    std::uniform_int_distribution<std::size_t> pick_member(0, members.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_neighbor(0, k - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Neighbor lists are computed lazily for the members actually drawn.
    std::unordered_map<std::size_t, std::vector<std::size_t>> knn_cache;
    auto neighbors_of = [&](std::size_t m) -> const std::vector<std::size_t>& {
      auto it = knn_cache.find(m);
      if (it != knn_cache.end()) return it->second;
      const auto base = data.x.row(members[m]);
      std::vector<std::pair<double, std::size_t>> d;
      d.reserve(members.size() - 1);
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (j != m) d.emplace_back(distance2(base, data.x.row(members[j])), j);
      }
      std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
      std::vector<std::size_t> nn(k);
      for (std::size_t i = 0; i < k; ++i) nn[i] = d[i].second;
      return knn_cache.emplace(m, std::move(nn)).first->second;
    };

    for (std::size_t s = 0; s < needed; ++s) {
      const std::size_t m = pick_member(rng);
      const std::size_t n = neighbors_of(m)[pick_neighbor(rng)];
      const double u = unit(rng);
      const auto x = data.x.row(members[m]);
      const auto xn = data.x.row(members[n]);
      for (std::size_t c = 0; c < synthetic.size(); ++c) {
        synthetic[c] = std::isnan(x[c]) || std::isnan(xn[c]) ? x[c] : x[c] + u * (xn[c] - x[c]);
      }
      out.x.append_row(synthetic);
      out.y.push_back(label);
      if (parents) parents->emplace_back(members[m], members[n]);
    }
  }
  return out;
}

nlohmann::json to_json(const ResampleReport& report) {
  auto counts = [](const std::map<int, std::size_t>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [label, n] : m) j[std::to_string(label)] = n;
    return j;
  };
  return {{"before", counts(report.before)},
          {"after", counts(report.after)},
          {"removed", counts(report.removed)},
          {"synthetic_count", counts(report.synthetic_count)},
          {"seed", report.seed}};
}

ClassTargets class_targets_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kMalformedDocument, "class targets must be a JSON object");
  ClassTargets t;
  try {
    for (const auto& [key, value] : doc.items()) t[std::stoi(key)] = value.get<std::size_t>();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("class targets: ") + e.what());
  }
  return t;
}

std::pair<LabeledSet, ResampleReport> two_stage_balance(const LabeledSet& data, const ClassTargets& under,
                                                        const ClassTargets& over, std::uint64_t seed,
                                                        std::size_t k) {
  ResampleReport report;
  report.seed = seed;
  report.before = data.class_counts();
  LabeledSet reduced = random_undersample(data, under, seed);
  const auto mid = reduced.class_counts();
  LabeledSet balanced = smote_oversample(reduced, over, k, seed, nullptr);
  report.after = balanced.class_counts();
  for (const auto& [label, n] : report.before) {
    const std::size_t m = mid.count(label) ? mid.at(label) : 0;
    report.removed[label] = n - m;
    report.synthetic_count[label] = report.after[label] - m;
  }
  return {std::move(balanced), std::move(report)};
}

}  // namespace crashcast::resampling
