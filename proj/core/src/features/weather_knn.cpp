#include "crashcast/features/weather_knn.hpp"

#include <algorithm>
#include <cmath>

#include "crashcast/error.hpp"
#include "crashcast/features/risk.hpp"

namespace crashcast::features {

namespace {

std::array<double, 4> raw(const WeatherSnapshot& w) {
  return {w.temperature_c, w.precipitation_mm_hr, w.visibility_km, w.wind_kmh};
}

}  // namespace

WeatherKnnIndex::WeatherKnnIndex(std::vector<WeatherSnapshot> history, std::vector<Severity> severities,
                                 std::vector<std::string> ids)
    : history_(std::move(history)), severities_(std::move(severities)), ids_(std::move(ids)) {
  if (history_.empty()) throw Error(ErrorCode::kEmptyHistory, "weather history is empty");
  if (history_.size() != severities_.size() || (!ids_.empty() && ids_.size() != history_.size())) {
    throw Error(ErrorCode::kLengthMismatch, "history, severities and ids must align");
  }
  const double n = static_cast<double>(history_.size());
  for (const auto& w : history_) {
    const auto x = raw(w);
    for (std::size_t d = 0; d < 4; ++d) mean_[d] += x[d] / n;
  }
  std::array<double, 4> var{};
  for (const auto& w : history_) {
    const auto x = raw(w);
    for (std::size_t d = 0; d < 4; ++d) var[d] += (x[d] - mean_[d]) * (x[d] - mean_[d]) / n;
  }
  for (std::size_t d = 0; d < 4; ++d) scale_[d] = var[d] > 0.0 ? std::sqrt(var[d]) : 1.0;
  points_.reserve(history_.size());
  for (const auto& w : history_) points_.push_back(standardize(w));
}

WeatherKnnIndex WeatherKnnIndex::from_records(std::span<const CrashRecord> records, std::size_t max_history) {
  std::vector<const CrashRecord*> labelled;
  for (const auto& r : records) {
    if (r.severity) labelled.push_back(&r);
  }
  const std::size_t keep = std::min(labelled.size(), std::max<std::size_t>(max_history, 1));
  std::vector<WeatherSnapshot> h;
  std::vector<Severity> s;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < keep; ++i) {
    const CrashRecord& r = *labelled[i * labelled.size() / keep];
    h.push_back(record_weather(r));
    s.push_back(*r.severity);
    ids.push_back(r.id);
  }
  return WeatherKnnIndex(std::move(h), std::move(s), std::move(ids));
}

std::array<double, 4> WeatherKnnIndex::standardize(const WeatherSnapshot& w) const {
  auto x = raw(w);
  for (std::size_t d = 0; d < 4; ++d) x[d] = (x[d] - mean_[d]) / scale_[d];
  return x;
}

std::vector<std::size_t> WeatherKnnIndex::nearest(const WeatherSnapshot& query, std::size_t k,
                                                  std::string_view exclude_id) const {
  if (empty()) throw Error(ErrorCode::kEmptyHistory, "weather history is empty");
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  const auto q = standardize(query);
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!exclude_id.empty() && !ids_.empty() && ids_[i] == exclude_id) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += (points_[i][j] - q[j]) * (points_[i][j] - q[j]);
    d.emplace_back(std::sqrt(s), i);
  }
  k = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
  return out;
}

double WeatherKnnIndex::risk(const WeatherSnapshot& query, std::size_t k, std::string_view exclude_id) const {
  const auto idx = nearest(query, k, exclude_id);
  if (idx.empty()) throw Error(ErrorCode::kEmptyHistory, "no neighbors left after exclusion");
  const auto q = standardize(query);
  double num = 0.0, den = 0.0;
  for (std::size_t i : idx) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += (points_[i][j] - q[j]) * (points_[i][j] - q[j]);
    const double w = 1.0 / (std::sqrt(s) + 1e-6);
    num += w * severity_index(severities_[i]) / 3.0;
    den += w;
  }
  return std::clamp(num / den, 0.0, 1.0);
}

double weather_knn_risk(const WeatherSnapshot& query, std::span<const std::pair<WeatherSnapshot, Severity>> history,
                        std::size_t k) {
  std::vector<WeatherSnapshot> h;
  std::vector<Severity> s;
  for (const auto& [w, sev] : history) {
    h.push_back(w);
    s.push_back(sev);
  }
  return WeatherKnnIndex(std::move(h), std::move(s)).risk(query, k);
}

}  // namespace crashcast::features
