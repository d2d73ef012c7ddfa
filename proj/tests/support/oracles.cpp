#include "support/oracles.hpp"

#include <cmath>

namespace crashcast::testing {

std::pair<double, double> one_pass_mean_std(const std::vector<double>& values) {
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (double x : values) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  return {mean, n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0};
}

double two_pass_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double sum = 0.0;
  for (double x : values) sum += x;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace crashcast::testing

#include <algorithm>
#include <map>
#include <numbers>

namespace crashcast::testing {


std::vector<int> brute_dbscan(const std::vector<GeoPoint>& points, const std::vector<double>& eps, int min_samples) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[i][j] = haversine_km(points[i], points[j]);
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 0;
    for (std::size_t j = 0; j < n; ++j) count += d[i][j] <= eps[i] ? 1 : 0;
    core[i] = count >= min_samples;
  }
  // Flood fill over core points.
  std::vector<int> comp(n, -1);
  int next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (!core[s] || comp[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    comp[s] = next;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      for (std::size_t q = 0; q < n; ++q) {
        if (core[q] && comp[q] < 0 && d[p][q] <= std::max(eps[p], eps[q])) {
          comp[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      labels[i] = comp[i];
      continue;
    }
    std::ptrdiff_t best = -1;
    for (std::size_t p = 0; p < n; ++p) {
      if (!core[p] || d[p][i] > eps[p]) continue;
      if (best < 0) {
        best = static_cast<std::ptrdiff_t>(p);
        continue;
      }
      const auto b = static_cast<std::size_t>(best);
      if (d[p][i] < d[b][i] || (d[p][i] == d[b][i] && std::pair(points[p].lat(), points[p].lon()) <
                                                           std::pair(points[b].lat(), points[b].lon()))) {
        best = static_cast<std::ptrdiff_t>(p);
      }
    }
    if (best >= 0) labels[i] = comp[static_cast<std::size_t>(best)];
  }
  return labels;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [it1, new1] = ab.emplace(a[i], b[i]);
    auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

double brute_weather_knn(const WeatherSnapshot& query, const std::vector<WeatherSnapshot>& history,
                         const std::vector<int>& severities, std::size_t k) {
  auto feats = [](const WeatherSnapshot& w) {
    return std::vector<double>{w.temperature_c, w.precipitation_mm_hr, w.visibility_km, w.wind_kmh};
  };
  std::vector<double> mean(4, 0.0), sd(4, 0.0);
  for (const auto& w : history) {
    const auto f = feats(w);
    for (int j = 0; j < 4; ++j) mean[j] += f[j];
  }
  for (auto& m : mean) m /= static_cast<double>(history.size());
  for (const auto& w : history) {
    const auto f = feats(w);
    for (int j = 0; j < 4; ++j) sd[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
  }
  for (auto& s : sd) {
    s = std::sqrt(s / static_cast<double>(history.size()));
    if (s == 0.0) s = 1.0;
  }
  const auto q = feats(query);
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto f = feats(history[i]);
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += std::pow((f[j] - mean[j]) / sd[j] - (q[j] - mean[j]) / sd[j], 2);
    all.emplace_back(std::sqrt(s), i);
  }
  std::sort(all.begin(), all.end());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) {
    const double w = 1.0 / (all[i].first + 1e-6);
    num += w * severities[all[i].second] / 3.0;
    den += w;
  }
  return num / den;
}

}  // namespace crashcast::testing
