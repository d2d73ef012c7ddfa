#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crashcast/record.hpp"

namespace crashcast::features {

// Exact k-nearest-neighbor risk in standardized (temperature, precipitation,
// visibility, wind) space. risk = sum w_i * severity_i / 3 / sum w_i over the
// k nearest, w_i = 1 / (d_i + 1e-6); distance ties go to the lower history index.
class WeatherKnnIndex {
 public:
  WeatherKnnIndex() = default;
  // Throws kEmptyHistory. `ids` may be empty; when given it enables query
  // exclusion by record id (leave-one-out on training data).
  WeatherKnnIndex(std::vector<WeatherSnapshot> history, std::vector<Severity> severities,
                  std::vector<std::string> ids = {});

  // Keeps at most `max_history` labelled records, taken at an even stride.
  static WeatherKnnIndex from_records(std::span<const CrashRecord> records, std::size_t max_history);

  double risk(const WeatherSnapshot& query, std::size_t k, std::string_view exclude_id = {}) const;

  // Indices of the k nearest history entries, nearest first.
  std::vector<std::size_t> nearest(const WeatherSnapshot& query, std::size_t k, std::string_view exclude_id = {}) const;

  std::size_t size() const noexcept { return severities_.size(); }
  bool empty() const noexcept { return severities_.empty(); }
  const std::array<double, 4>& mean() const noexcept { return mean_; }
  const std::array<double, 4>& scale() const noexcept { return scale_; }
  const std::vector<WeatherSnapshot>& history() const noexcept { return history_; }
  const std::vector<Severity>& severities() const noexcept { return severities_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::array<double, 4> standardize(const WeatherSnapshot& w) const;

  std::vector<WeatherSnapshot> history_;
  std::vector<Severity> severities_;
  std::vector<std::string> ids_;
  std::vector<std::array<double, 4>> points_;
  std::array<double, 4> mean_{};
  std::array<double, 4> scale_{1.0, 1.0, 1.0, 1.0};
};

double weather_knn_risk(const WeatherSnapshot& query, std::span<const std::pair<WeatherSnapshot, Severity>> history,
                        std::size_t k);

}  // namespace crashcast::features
