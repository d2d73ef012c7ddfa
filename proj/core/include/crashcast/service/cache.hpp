#pragma once

#include <array>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "crashcast/features/feature_vector.hpp"
#include "crashcast/record.hpp"
#include "crashcast/time.hpp"

namespace crashcast::service {

// (cell at serving resolution, 15-minute bucket, WEATHER1 category). `variant`
// is 0 for plain requests and a hash of the what-if overrides otherwise.
struct CacheKey {
  std::uint64_t cell = 0;
  std::int64_t bucket = 0;
  int weather = 1;
  std::uint64_t variant = 0;

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

struct CacheKeyHash {
  std::size_t operator()(const CacheKey& k) const noexcept;
};

// Everything a /predict response carries apart from tier and latency.
struct CachedPrediction {
  std::array<double, kSeverityCount> severity_probs{};
  double risk_score = 0.0;
  double confidence = 0.0;
  int predicted_class = 0;
  std::array<double, features::kFactorGroupCount> contributing_factors{};  // sums to 1
  features::FactorGroup dominant_factor = features::FactorGroup::kWeather;
  std::vector<std::string> recommended_actions;
  features::FeatureVector features{};
  WeatherSnapshot weather;
  Timestamp computed_at{};
  // The fields above as a JSON object body without the outer braces, rendered
  // once so cache hits only splice strings.
  std::string json_fields;
};

using PredictionPtr = std::shared_ptr<const CachedPrediction>;

// One immutable refresh result. Readers hold a shared_ptr, so a lookup sees a
// single generation even while the next one is published.
struct PrimaryGeneration {
  std::uint64_t id = 0;
  std::int64_t bucket = 0;
  Timestamp computed_at{};
  std::unordered_map<std::uint64_t, PredictionPtr> entries;  // by cell key

  // Hit only for plain requests in this bucket whose weather category matches
  // the one the entry was computed under.

  PredictionPtr find(const CacheKey& key) const;
};

class PrimaryCache {
 public:
  std::shared_ptr<const PrimaryGeneration> current() const;
  void publish(std::shared_ptr<const PrimaryGeneration> generation);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const PrimaryGeneration> current_;
};

struct SecondaryCacheConfig {
  std::size_t capacity = 500;
  double pin_confidence = 0.9;
  double pin_fraction_max = 0.10;

  // Throws kInvalidArgument unless capacity >= 1 and 0 < pin_fraction_max < 1.
  void validate() const;
  std::size_t pin_capacity() const noexcept;
};

// LRU with confidence pinning. Entries at or above pin_confidence are pinned
// while fewer than pin_capacity() entries are; pinned entries are skipped by
// eviction. All operations are serialized by one mutex.
class SecondaryCache {
 public:
  explicit SecondaryCache(SecondaryCacheConfig config = {});

  // Hit refreshes recency.
  PredictionPtr lookup(const CacheKey& key);
  bool contains(const CacheKey& key) const;
  // Replaces an existing value under the same key. Returns evicted keys.
  std::vector<CacheKey> insert(const CacheKey& key, PredictionPtr value, double confidence);
  // Unpins entries of buckets before `bucket`; they then age out normally.
  void release_pins_before(std::int64_t bucket);
  void clear();

  std::size_t size() const;
  std::size_t pinned() const;
  const SecondaryCacheConfig& config() const noexcept { return config_; }

 private:
  struct Entry {
    CacheKey key;
    PredictionPtr value;
    bool pinned = false;
  };

  SecondaryCacheConfig config_;
  mutable std::mutex mutex_;
  std::list<Entry> lru_;  // front is most recent
  std::unordered_map<CacheKey, std::list<Entry>::iterator, CacheKeyHash> map_;
  std::size_t pinned_ = 0;
};

}  // namespace crashcast::service
