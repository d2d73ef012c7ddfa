#include "crashcast/service/cache.hpp"

#include <cmath>

#include "crashcast/error.hpp"

namespace crashcast::service {

std::size_t CacheKeyHash::operator()(const CacheKey& k) const noexcept {
  std::uint64_t h = k.cell * 0x9E3779B97F4A7C15ull;
  h ^= static_cast<std::uint64_t>(k.bucket) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  h ^= static_cast<std::uint64_t>(k.weather) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  h ^= k.variant + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  return static_cast<std::size_t>(h);
}

PredictionPtr PrimaryGeneration::find(const CacheKey& key) const {
  if (key.variant != 0 || key.bucket != bucket) return nullptr;
  const auto it = entries.find(key.cell);
  if (it == entries.end() || it->second->weather.category != key.weather) return nullptr;
  return it->second;
}

std::shared_ptr<const PrimaryGeneration> PrimaryCache::current() const {
  std::lock_guard lock(mutex_);
  return current_;
}

void PrimaryCache::publish(std::shared_ptr<const PrimaryGeneration> generation) {
  std::lock_guard lock(mutex_);
  current_ = std::move(generation);
}

void SecondaryCacheConfig::validate() const {
  if (capacity == 0) throw Error(ErrorCode::kInvalidArgument, "secondary cache capacity must be positive");
  if (!(pin_fraction_max > 0.0 && pin_fraction_max < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "pin_fraction_max must lie in (0, 1)");
  }
  if (!(pin_confidence >= 0.0 && pin_confidence <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "pin_confidence must lie in [0, 1]");
  }
}

std::size_t SecondaryCacheConfig::pin_capacity() const noexcept {
  return static_cast<std::size_t>(std::floor(pin_fraction_max * static_cast<double>(capacity)));
}

SecondaryCache::SecondaryCache(SecondaryCacheConfig config) : config_(config) { config_.validate(); }

PredictionPtr SecondaryCache::lookup(const CacheKey& key) {
  std::lock_guard lock(mutex_);
  const auto it = map_.find(key);
  if (it == map_.end()) return nullptr;
  lru_.splice(lru_.begin(), lru_, it->second);
  return it->second->value;
}

bool SecondaryCache::contains(const CacheKey& key) const {
  std::lock_guard lock(mutex_);
  return map_.count(key) != 0;
}

std::vector<CacheKey> SecondaryCache::insert(const CacheKey& key, PredictionPtr value, double confidence) {
  std::lock_guard lock(mutex_);
  std::vector<CacheKey> evicted;
  if (const auto it = map_.find(key); it != map_.end()) {
    it->second->value = std::move(value);
    lru_.splice(lru_.begin(), lru_, it->second);
    return evicted;
  }
  // pin_capacity < capacity, so a full cache always holds an unpinned entry.
  while (map_.size() >= config_.capacity) {
    auto victim = std::prev(lru_.end());
    while (victim->pinned) --victim;
    evicted.push_back(victim->key);
    map_.erase(victim->key);
    lru_.erase(victim);
  }
  const bool pin = confidence >= config_.pin_confidence && pinned_ < config_.pin_capacity();
  lru_.push_front(Entry{key, std::move(value), pin});
  map_.emplace(key, lru_.begin());
  if (pin) ++pinned_;
  return evicted;
}

void SecondaryCache::release_pins_before(std::int64_t bucket) {
  std::lock_guard lock(mutex_);
  for (auto& e : lru_) {
    if (e.pinned && e.key.bucket < bucket) {
      e.pinned = false;
      --pinned_;
    }
  }
}

void SecondaryCache::clear() {
  std::lock_guard lock(mutex_);
  lru_.clear();
  map_.clear();
  pinned_ = 0;
}

std::size_t SecondaryCache::size() const {
  std::lock_guard lock(mutex_);
  return map_.size();
}

std::size_t SecondaryCache::pinned() const {
  std::lock_guard lock(mutex_);
  return pinned_;
}

}  // namespace crashcast::service
