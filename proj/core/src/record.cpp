#include "crashcast/record.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

namespace crashcast {

namespace {

constexpr std::array<std::string_view, kFlagCount> kFlagNames = {
    "ALCOHOL_RELATED", "DRUGGED_DRIVER", "MARIJUANA_RELATED", "CELL_PHONE",      "DISTRACTED",
    "FATIGUE_ASLEEP",  "ICY_ROAD",       "WET_ROAD",          "SNOW_SLUSH_ROAD", "AGGRESSIVE_DRIVING",
    "LOCAL_ROAD",      "UNBELTED",       "CURVE_DVR_ERROR",   "INTERSTATE",      "INTERSECTION_RELATED",
};

constexpr std::array<std::string_view, kCodeCount> kCodeNames = {"WEATHER1", "ILLUMINATION", "ROAD_CONDITION"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
         });
}

double to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

GeoPoint::GeoPoint(double lat, double lon) : lat_(lat), lon_(lon) {
  if (!valid(lat, lon)) {
    throw Error(ErrorCode::kInvalidCoordinate,
                "coordinate out of range: (" + std::to_string(lat) + ", " + std::to_string(lon) + ")");
  }
}

bool GeoPoint::valid(double lat, double lon) noexcept {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double dlat = to_rad(b.lat() - a.lat());
  const double dlon = to_rad(b.lon() - a.lon());
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  double h = s1 * s1 + std::cos(to_rad(a.lat())) * std::cos(to_rad(b.lat())) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

Severity parse_severity(int code) {
  if (code < 0 || code >= kSeverityCount) {
    throw Error(ErrorCode::kOutOfRangeSeverity, "severity code " + std::to_string(code));
  }
  return static_cast<Severity>(code);
}

std::string_view severity_name(Severity s) noexcept {
  switch (s) {
    case Severity::kMinor: return "Minor";
    case Severity::kModerate: return "Moderate";
    case Severity::kSerious: return "Serious";
    case Severity::kFatal: return "Fatal";
  }
  return "Unknown";
}

std::string_view flag_name(Flag f) noexcept { return kFlagNames[index_of(f)]; }
std::string_view code_name(CodeField c) noexcept { return kCodeNames[index_of(c)]; }

std::optional<Flag> flag_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kFlagCount; ++i) {
    if (iequals(name, kFlagNames[i])) return static_cast<Flag>(i);
  }
  return std::nullopt;
}

std::optional<CodeField> code_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kCodeCount; ++i) {
    if (iequals(name, kCodeNames[i])) return static_cast<CodeField>(i);
  }
  return std::nullopt;
}

std::string_view weather_category_name(int category) noexcept {
  switch (category) {
    case 1: return "Clear";
    case 2: return "Cloudy";
    case 3: return "Rain";
    case 4: return "Snow";
    case 5: return "Sleet/Hail";
    case 6: return "Fog";
    default: return "Unknown";
  }
}

void WeatherSnapshot::validate() const {
  if (category < 1 || category > kWeatherCategoryCount) {
    throw Error(ErrorCode::kInvalidArgument, "WEATHER1 category must be 1..6");
  }
  if (!(precipitation_mm_hr >= 0.0) || !(visibility_km >= 0.0) || !(wind_kmh >= 0.0) ||
      !std::isfinite(temperature_c)) {
    throw Error(ErrorCode::kInvalidArgument, "weather snapshot components must be finite and nonnegative");
  }
}

WeatherSnapshot nominal_weather(int category) {
  WeatherSnapshot w;
  w.category = category;
  switch (category) {
    case 2: w.temperature_c = 12.0; w.precipitation_mm_hr = 0.0; w.visibility_km = 12.0; w.wind_kmh = 14.0; break;
    case 3: w.temperature_c = 10.0; w.precipitation_mm_hr = 4.0; w.visibility_km = 6.0; w.wind_kmh = 18.0; break;
    case 4: w.temperature_c = -3.0; w.precipitation_mm_hr = 2.5; w.visibility_km = 2.0; w.wind_kmh = 20.0; break;
    case 5: w.temperature_c = -1.0; w.precipitation_mm_hr = 3.0; w.visibility_km = 3.0; w.wind_kmh = 26.0; break;
    case 6: w.temperature_c = 8.0; w.precipitation_mm_hr = 0.2; w.visibility_km = 0.8; w.wind_kmh = 5.0; break;
    default: w.category = 1; w.temperature_c = 16.0; w.precipitation_mm_hr = 0.0; w.visibility_km = 16.0;
      w.wind_kmh = 10.0; break;
  }
  return w;
}

}  // namespace crashcast
