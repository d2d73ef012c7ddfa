#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "crashcast/boosting/booster.hpp"
#include "crashcast/error.hpp"

namespace crashcast::boosting {

GossSample goss_sample(std::span<const double> gradient_magnitudes, std::span<const int> severities,
                       const GossConfig& goss, std::uint64_t seed) {
  goss.validate();
  const std::size_t n = gradient_magnitudes.size();
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "goss_sample: no rows");
  if (severities.size() != n) throw Error(ErrorCode::kLengthMismatch, "goss_sample: severities length");

  std::map<int, std::size_t> class_count;
  for (int s : severities) ++class_count[s];
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double rarity = static_cast<double>(n) / static_cast<double>(class_count[severities[i]]);
    score[i] = std::abs(gradient_magnitudes[i]) * std::pow(rarity, goss.severity_weight_exponent);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto top_n = std::min(n, static_cast<std::size_t>(std::ceil(goss.a_top * static_cast<double>(n) - 1e-9)));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_n), order.end(),
                    [&](std::size_t a, std::size_t b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });

  std::vector<std::pair<std::size_t, double>> picked;
  picked.reserve(n);
  for (std::size_t i = 0; i < top_n; ++i) picked.emplace_back(order[i], 1.0);

  if (goss.b_rest > 0.0 && top_n < n) {
    std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(top_n), order.end());
    std::sort(rest.begin(), rest.end());
    const auto rest_n =
        std::min(rest.size(), static_cast<std::size_t>(std::ceil(goss.b_rest * static_cast<double>(n) - 1e-9)));
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates over the index-sorted remainder.
    for (std::size_t i = 0; i < rest_n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
      std::swap(rest[i], rest[pick(rng)]);
    }
    const double w = (1.0 - goss.a_top) / goss.b_rest;
    for (std::size_t i = 0; i < rest_n; ++i) picked.emplace_back(rest[i], w);
  }

  std::sort(picked.begin(), picked.end());
  GossSample out;
  out.indices.reserve(picked.size());
  out.weights.reserve(picked.size());
  for (const auto& [i, w] : picked) {
    out.indices.push_back(i);
    out.weights.push_back(w);
  }
  return out;
}

}  // namespace crashcast::boosting
