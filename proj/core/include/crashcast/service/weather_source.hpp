#pragma once

#include <atomic>
#include <chrono>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "crashcast/record.hpp"
#include "crashcast/time.hpp"

namespace crashcast::service {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

// Test and replay clock; safe to read while another thread sets it.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start) : seconds_(start.time_since_epoch().count()) {}
  Timestamp now() const override { return Timestamp{std::chrono::seconds{seconds_.load()}}; }
  void set(Timestamp t) { seconds_.store(t.time_since_epoch().count()); }
  void advance(std::chrono::seconds d) { seconds_.fetch_add(d.count()); }

 private:
  std::atomic<std::int64_t> seconds_;
};

// Conditions at a place and time. Throws kWeatherSourceUnavailable when no
// observation covers the request.
class WeatherSource {
 public:
  virtual ~WeatherSource() = default;
  virtual WeatherSnapshot current(const GeoPoint& where, Timestamp at) const = 0;
};

// Region-wide observation timeline replayed from CSV. The latest observation at
// or before the query time wins if it is at most `retention` old.
class FixtureWeatherSource final : public WeatherSource {
 public:
  explicit FixtureWeatherSource(std::vector<WeatherSnapshot> timeline,
                                std::chrono::seconds retention = std::chrono::hours(24));

  // Columns: observed_at, weather1, temperature_c, precipitation_mm_hr,
  // visibility_km, wind_kmh. Throws kUnreadableFile, kMissingHeader,
  // kInvalidArgument (with the line number).
  static FixtureWeatherSource load(const std::string& path);
  static FixtureWeatherSource parse(std::istream& in);

  WeatherSnapshot current(const GeoPoint& where, Timestamp at) const override;
  const std::vector<WeatherSnapshot>& timeline() const noexcept { return timeline_; }

 private:
  std::vector<WeatherSnapshot> timeline_;  // sorted by observed_at
  std::chrono::seconds retention_;
};

void write_weather_fixture(std::ostream& out, std::span<const WeatherSnapshot> timeline);

}  // namespace crashcast::service
