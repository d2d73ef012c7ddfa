#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/features/clustering.hpp"
#include "crashcast/features/risk.hpp"
#include "crashcast/features/weather_knn.hpp"
#include "crashcast/matrix.hpp"
#include "crashcast/record.hpp"

namespace crashcast::features {

// Fixed feature order. The first twelve are engineered; then the fifteen flags
// in canonical order; then the three codes. Missing values are NaN.
inline constexpr std::size_t kFeatureCount = 30;
enum FeatureIndex : std::size_t {
  kImpairmentRisk = 0,
  kDistractionRisk,
  kAdverseRoad,
  kWeatherRisk,
  kTotalEnvironmentalRisk,
  kEnvironmentalIndex,
  kWeatherKnnRisk,
  kHourSin,
  kHourCos,
  kMonthSin,
  kMonthCos,
  kClusterDensity,
  kFirstFlag,
  kFirstCode = kFirstFlag + kFlagCount,
};

using FeatureVector = std::array<double, kFeatureCount>;

const std::array<std::string_view, kFeatureCount>& feature_names();

enum class FactorGroup { kWeather, kTemporal, kHistorical, kBehavioral, kGeometry };
inline constexpr std::size_t kFactorGroupCount = 5;
std::string_view factor_group_name(FactorGroup g) noexcept;
FactorGroup factor_group_of(std::size_t feature) noexcept;

struct FeatureFitOptions {
  ClusterParams clusters{1.0, 3, true, 0.5, 2.0, 9};
  std::size_t knn_k = 25;
  std::size_t knn_max_history = 4000;
  bool fit_environmental = true;
};

struct FeatureContext {
  static constexpr int kVersion = 1;

  BehavioralRiskWeights behavioral;
  EnvironmentalRiskWeights environmental;
  bool environmental_fitted = false;
  ClusterParams cluster_params;
  ClusterLookup clusters;
  WeatherKnnIndex weather_knn;
  std::size_t knn_k = 25;

  // Environmental weights need 500 labelled records; with fewer, or on a
  // degenerate design, the defaults are kept and environmental_fitted is false.
  // Throws kEmptyHistory when no record carries both a location and a severity.
  static FeatureContext fit(std::span<const CrashRecord> records, const FeatureFitOptions& options = {});

  // `weather` replaces the record's own deterministic snapshot (serving-time
  // conditions). The record's id is excluded from its own weather neighbors.
  FeatureVector assemble(const CrashRecord& record, const std::optional<WeatherSnapshot>& weather = std::nullopt) const;

  Matrix assemble_all(std::span<const CrashRecord> records) const;
};

nlohmann::json to_json(const FeatureContext& ctx);
// Throws kMalformedDocument.
FeatureContext feature_context_from_json(const nlohmann::json& doc);

}  // namespace crashcast::features
