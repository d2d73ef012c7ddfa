#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "crashcast/error.hpp"
#include "crashcast/time.hpp"

namespace crashcast {

inline constexpr double kEarthRadiusKm = 6371.0;

// Latitude/longitude in degrees. Construction validates bounds and rejects NaN.
class GeoPoint {
 public:
  GeoPoint() = default;
  GeoPoint(double lat, double lon);

  double lat() const noexcept { return lat_; }
  double lon() const noexcept { return lon_; }

  static bool valid(double lat, double lon) noexcept;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(const GeoPoint& a, const GeoPoint& b) noexcept;

enum class Severity : std::uint8_t { kMinor = 0, kModerate = 1, kSerious = 2, kFatal = 3 };
inline constexpr int kSeverityCount = 4;

Severity parse_severity(int code);
std::string_view severity_name(Severity s) noexcept;
constexpr int severity_index(Severity s) noexcept { return static_cast<int>(s); }

// Canonical binary risk fields. Order is the CSV column order and the
// passthrough order inside a FeatureVector.
enum class Flag : std::uint8_t {
  kAlcoholRelated,
  kDruggedDriver,
  kMarijuanaRelated,
  kCellPhone,
  kDistracted,
  kFatigueAsleep,
  kIcyRoad,
  kWetRoad,
  kSnowSlushRoad,
  kAggressiveDriving,
  kLocalRoad,
  kUnbelted,
  kCurveDriverError,
  kInterstate,
  kIntersectionRelated,
};
inline constexpr std::size_t kFlagCount = 15;

enum class CodeField : std::uint8_t { kWeather1, kIllumination, kRoadCondition };
inline constexpr std::size_t kCodeCount = 3;

std::string_view flag_name(Flag f) noexcept;
std::string_view code_name(CodeField c) noexcept;
std::optional<Flag> flag_from_name(std::string_view name) noexcept;       // case-insensitive
std::optional<CodeField> code_from_name(std::string_view name) noexcept;  // case-insensitive

constexpr std::size_t index_of(Flag f) noexcept { return static_cast<std::size_t>(f); }
constexpr std::size_t index_of(CodeField c) noexcept { return static_cast<std::size_t>(c); }

// WEATHER1 categories '1'..'6'.
inline constexpr int kWeatherCategoryCount = 6;
std::string_view weather_category_name(int category) noexcept;

using FlagValues = std::array<std::optional<bool>, kFlagCount>;
using CodeValues = std::array<std::optional<int>, kCodeCount>;

struct CrashRecord {
  std::string id;
  std::optional<GeoPoint> location;
  std::optional<Timestamp> occurred_at;
  std::optional<int> hour_of_day;  // 0..23
  std::optional<int> crash_month;  // 1..12
  std::optional<Severity> severity;
  std::string county;
  FlagValues flags{};
  CodeValues codes{};

  std::optional<bool> flag(Flag f) const { return flags[index_of(f)]; }
  std::optional<int> code(CodeField c) const { return codes[index_of(c)]; }
  void set_flag(Flag f, std::optional<bool> v) { flags[index_of(f)] = v; }
  void set_code(CodeField c, std::optional<int> v) { codes[index_of(c)] = v; }

  friend bool operator==(const CrashRecord&, const CrashRecord&) = default;
};

struct WeatherSnapshot {
  int category = 1;  // WEATHER1 code
  double temperature_c = 15.0;
  double precipitation_mm_hr = 0.0;
  double visibility_km = 16.0;
  double wind_kmh = 10.0;
  Timestamp observed_at{};

  // Throws kInvalidArgument when a nonnegative component is negative or the
  // category is outside 1..6.
  void validate() const;

  friend bool operator==(const WeatherSnapshot&, const WeatherSnapshot&) = default;
};

// Representative conditions for a WEATHER1 category, used when a record carries
// only the category code.
WeatherSnapshot nominal_weather(int category);

}  // namespace crashcast
