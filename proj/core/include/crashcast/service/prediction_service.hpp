#pragma once

#include <atomic>
#include <chrono>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/cell_index.hpp"
#include "crashcast/evaluation/evaluation.hpp"
#include "crashcast/model_bundle.hpp"
#include "crashcast/service/cache.hpp"
#include "crashcast/service/crash_store.hpp"
#include "crashcast/service/recommendations.hpp"
#include "crashcast/service/weather_source.hpp"

namespace crashcast::service {

// Key-value configuration ("key = value", '#' comments).
struct ServiceConfig {
  int serving_resolution = 11;  // 0.088 degree cells
  int store_index_resolution = 8;
  SecondaryCacheConfig secondary;
  std::chrono::seconds refresh_period = std::chrono::minutes(15);
  std::string recommendations_path;  // empty: built-in table
  double display_radius_base_m = 400.0;
  std::size_t drift_window = 1000;
  std::size_t latency_window = 4096;
  std::size_t server_threads = 512;
  std::size_t max_hotspots = 1000;

  void validate() const;
  // Throws kInvalidArgument naming the line for unknown keys or bad values.
  static ServiceConfig parse(std::istream& in);
  static ServiceConfig load(const std::string& path);
};

using FlagOverrides = std::map<Flag, bool>;

struct PredictionRequest {
  GeoPoint location;
  std::optional<Timestamp> at;  // defaults to the service clock
  std::optional<WeatherSnapshot> weather_override;
  FlagOverrides flags_override;

  bool has_overrides() const noexcept { return weather_override.has_value() || !flags_override.empty(); }
};

// Throws kMalformedDocument for a malformed body and kInvalidCoordinate for
// out-of-range or (0, 0) coordinates.
PredictionRequest parse_prediction_request(const nlohmann::json& body);
nlohmann::json to_json(const PredictionRequest& request);

enum class CacheTier { kPrimary, kSecondary, kMiss };
std::string_view cache_tier_name(CacheTier t) noexcept;

struct PredictionResponse {
  PredictionPtr core;
  CacheTier tier = CacheTier::kMiss;
  double latency_ms = 0.0;
  CellId cell;
  std::int64_t bucket = 0;
};

nlohmann::json to_json(const PredictionResponse& response);
// Serialized form of to_json(response) built from the cached fields.
std::string response_body(const PredictionResponse& response);
// JSON fields of a prediction without tier, latency, cell and bucket.
nlohmann::json core_json(const CachedPrediction& core);

struct Hotspot {
  CellId cell;
  GeoPoint center;
  double risk_score = 0.0;
  features::FactorGroup dominant_factor = features::FactorGroup::kWeather;
  double expected_impact = 0.0;  // sum_s p_s * s
  double display_radius_m = 0.0;
};

nlohmann::json to_json(const Hotspot& h);

// The record a cell-level prediction is made for: the given point and time,
// the observed weather, road-surface flags and codes implied by the weather,
// illumination from the hour, every other flag false; then the overrides.
CrashRecord scenario_record(const GeoPoint& point, Timestamp at, const WeatherSnapshot& weather,
                            const FlagOverrides& overrides = {});

// display radius = base * sqrt(risk * expected_impact)
double display_radius(double base_m, double risk_score, double expected_impact);

struct RefreshResult {
  std::uint64_t generation = 0;
  std::size_t entries = 0;
  double seconds = 0.0;
};

class PredictionService {
 public:
  // `model` may be null until load_model; predictions then throw kUnfittedModel.
  PredictionService(std::shared_ptr<const ModelBundle> model, std::shared_ptr<CrashStore> store,
                    std::shared_ptr<const WeatherSource> weather, std::shared_ptr<const Clock> clock,
                    ServiceConfig config = {}, RecommendationTable recommendations = RecommendationTable::defaults());

  // Primary hit, else secondary hit, else computed and inserted into the
  // secondary cache. Requests with overrides never read the primary cache.
  PredictionResponse predict(const PredictionRequest& request);

  // Computes a cell-level prediction without touching any cache or counter.
  PredictionPtr compute(const CellId& cell, Timestamp at, const WeatherSnapshot& weather,
                        const FlagOverrides& overrides = {}) const;
  // Same model path at an exact point instead of the cell center.
  PredictionPtr compute_at(const GeoPoint& point, Timestamp at, const WeatherSnapshot& weather,
                           const FlagOverrides& overrides = {}) const;

  // Active cells intersecting the box ranked by risk (ties by cell key), at
  // most k. Throws kInvalidArgument for an invalid box.
  std::vector<Hotspot> hotspots(const BoundingBox& box, std::optional<Timestamp> at, std::size_t k);

  // Recomputes every active cell for the clock's bucket and current weather and
  // publishes the result as one generation. On kWeatherSourceUnavailable the
  // previous generation stays, the service is marked stale and the error is
  // rethrown.
  RefreshResult refresh_primary();
  // Refreshes when the clock has entered a new bucket or refresh_period passed.
  bool refresh_if_due();

  // Stores the records, marks their cells active and scores labelled ones
  // against the drift monitor. Returns the number stored.
  std::size_t ingest(std::span<const CrashRecord> records);

  // Publishes a new model and drops every cached prediction.
  void load_model(std::shared_ptr<const ModelBundle> model);
  std::shared_ptr<const ModelBundle> model() const;

  WeatherSnapshot weather_at(const GeoPoint& where, Timestamp at) const;
  std::vector<CellId> active_cells() const;
  std::shared_ptr<const PrimaryGeneration> primary_generation() const { return primary_.current(); }
  const ServiceConfig& config() const noexcept { return config_; }
  CrashStore& store() noexcept { return *store_; }
  const Clock& clock() const noexcept { return *clock_; }
  CacheKey key_for(const PredictionRequest& request, Timestamp at, const WeatherSnapshot& weather) const;

  nlohmann::json metrics() const;
  nlohmann::json health() const;
  void record_rejected() noexcept { rejected_.fetch_add(1, std::memory_order_relaxed); }

 private:
  PredictionPtr compute_record(const CrashRecord& record, const WeatherSnapshot& weather) const;
  void record_latency(double ms);

  std::shared_ptr<CrashStore> store_;
  std::shared_ptr<const WeatherSource> weather_;
  std::shared_ptr<const Clock> clock_;
  ServiceConfig config_;
  RecommendationTable recommendations_;

  mutable std::mutex model_mutex_;
  std::shared_ptr<const ModelBundle> model_;

  PrimaryCache primary_;
  SecondaryCache secondary_;
  std::mutex refresh_mutex_;
  std::atomic<std::uint64_t> generation_counter_{0};
  std::atomic<bool> stale_{false};
  std::atomic<std::int64_t> last_refresh_{0};
  std::atomic<bool> refreshed_once_{false};

  mutable std::mutex active_mutex_;
  std::set<CellId> active_;

  mutable std::mutex drift_mutex_;
  std::optional<evaluation::DriftMonitor> drift_;

  std::atomic<std::uint64_t> primary_hits_{0}, secondary_hits_{0}, misses_{0}, rejected_{0};
  std::atomic<std::uint64_t> hotspot_requests_{0}, ingested_{0}, refreshes_{0}, refresh_failures_{0};
  mutable std::atomic<std::uint64_t> feature_ns_{0}, feature_computations_{0};
  mutable std::atomic<std::uint64_t> weather_fallbacks_{0};
  mutable std::mutex latency_mutex_;
  std::vector<double> latencies_;
  std::size_t latency_head_ = 0;
};

}  // namespace crashcast::service
