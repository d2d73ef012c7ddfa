#include "crashcast/pipeline/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace crashcast::pipeline {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

int days_in_month(int year, int month) {
  using namespace std::chrono;
  const auto last = year_month_day_last{std::chrono::year{year}, month_day_last{std::chrono::month{
                                                                     static_cast<unsigned>(month)}}};
  return static_cast<int>(static_cast<unsigned>(last.day()));
}

std::vector<std::size_t> allocate_counts(std::size_t n, const std::array<double, kSeverityCount>& p) {
  std::vector<std::size_t> counts(kSeverityCount);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kSeverityCount; ++c) {
    const double exact = p[c] * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % kSeverityCount].second];
  return counts;
}

template <class Rng>
std::size_t pick_weighted(Rng& rng, const std::vector<double>& weights) {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(rng);
}

std::array<double, kWeatherCategoryCount> weather_base(bool winter) {
  if (winter) return {0.45, 0.25, 0.08, 0.15, 0.04, 0.03};
  return {0.55, 0.25, 0.14, 0.0, 0.02, 0.04};
}

int illumination_for(int hour, double u) {
  // 1 daylight, 2 dark-unlit, 3 dark-lit, 4 dusk, 5 dawn
  if (hour >= 7 && hour <= 17) return u < 0.93 ? 1 : 4;
  if (hour == 5 || hour == 6) return u < 0.6 ? 5 : 2;
  if (hour == 18 || hour == 19) return u < 0.5 ? 4 : 3;
  return u < 0.55 ? 3 : 2;
}

}  // namespace

std::array<double, kSeverityCount> reference_severity_marginals() {
  constexpr double total = 43372.0 + 13364.0 + 2159.0 + 601.0;
  return {43372.0 / total, 13364.0 / total, 2159.0 / total, 601.0 / total};
}

std::vector<ClusterCenter> default_cluster_centers() {
  return {
      {GeoPoint(39.952, -75.165), 3.0, 0.10},  // Philadelphia
      {GeoPoint(40.441, -79.996), 2.0, 0.09},  // Pittsburgh
      {GeoPoint(40.273, -76.884), 1.0, 0.06},  // Harrisburg
      {GeoPoint(40.602, -75.471), 1.0, 0.06},  // Allentown
      {GeoPoint(42.129, -80.085), 0.6, 0.05},  // Erie
      {GeoPoint(41.408, -75.662), 0.7, 0.05},  // Scranton
      {GeoPoint(40.038, -76.306), 0.8, 0.06},  // Lancaster
      {GeoPoint(40.793, -77.860), 0.5, 0.05},  // State College
      {GeoPoint(40.336, -75.927), 0.7, 0.05},  // Reading
  };
}

std::map<std::string, double> default_planted_effects() {
  return {
      {"ALCOHOL_RELATED", 2.4},  {"DRUGGED_DRIVER", 2.1},     {"MARIJUANA_RELATED", 1.2}, {"CELL_PHONE", 0.9},
      {"DISTRACTED", 0.75},      {"FATIGUE_ASLEEP", 1.5},     {"ICY_ROAD", 1.5},          {"WET_ROAD", 0.75},
      {"SNOW_SLUSH_ROAD", 1.2},  {"AGGRESSIVE_DRIVING", 2.4}, {"LOCAL_ROAD", 0.9},        {"UNBELTED", 3.0},
      {"CURVE_DVR_ERROR", 1.95}, {"INTERSTATE", 0.6},         {"INTERSECTION_RELATED", -0.6},
  };
}

std::map<std::string, double> default_flag_base_rates() {
  return {
      {"ALCOHOL_RELATED", 0.05}, {"DRUGGED_DRIVER", 0.03},     {"MARIJUANA_RELATED", 0.02}, {"CELL_PHONE", 0.04},
      {"DISTRACTED", 0.15},      {"FATIGUE_ASLEEP", 0.03},     {"ICY_ROAD", 0.03},          {"WET_ROAD", 0.12},
      {"SNOW_SLUSH_ROAD", 0.03}, {"AGGRESSIVE_DRIVING", 0.10}, {"LOCAL_ROAD", 0.40},        {"UNBELTED", 0.05},
      {"CURVE_DVR_ERROR", 0.05}, {"INTERSTATE", 0.15},         {"INTERSECTION_RELATED", 0.35},
  };
}

void SyntheticConfig::validate() const {
  const double sum = std::accumulate(severity_marginals.begin(), severity_marginals.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::kInvalidArgument, "severity marginals must sum to 1");
  for (double m : severity_marginals) {
    if (!(m >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "severity marginals must be nonnegative");
  }
  for (const auto& c : cluster_centers) {
    if (!(c.weight >= 0.0) || !(c.spread_deg > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "cluster weights must be >= 0 and spreads > 0");
    }
  }
  if (!(background_weight >= 0.0) || !region.valid() || county_rows < 1 || county_cols < 1) {
    throw Error(ErrorCode::kInvalidArgument, "invalid region configuration");
  }
  if (!(defect_rate >= 0.0 && defect_rate < 1.0)) throw Error(ErrorCode::kInvalidArgument, "defect_rate in [0,1)");
  for (const auto& [name, _] : planted_effects) {
    if (!flag_from_name(name)) throw Error(ErrorCode::kInvalidArgument, "unknown planted effect field " + name);
  }
}

std::vector<CrashRecord> generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto counts = allocate_counts(config.n_records, config.severity_marginals);
  std::vector<int> severities;
  severities.reserve(config.n_records);
  for (std::size_t c = 0; c < kSeverityCount; ++c) severities.insert(severities.end(), counts[c], static_cast<int>(c));
  std::shuffle(severities.begin(), severities.end(), rng);

  std::vector<double> month_w(12, 1.0);
  for (int m : config.seasonal_peak_months) month_w.at(static_cast<std::size_t>(m - 1)) = config.seasonal_boost;
  std::vector<double> hour_w(24, 1.0);
  for (int h : config.rush_hours) hour_w.at(static_cast<std::size_t>(h)) = config.rush_boost;
  for (int h = 0; h < 5; ++h) hour_w[static_cast<std::size_t>(h)] *= 0.5;  // overnight lull

  std::vector<double> component_w{config.background_weight};
  for (const auto& c : config.cluster_centers) component_w.push_back(c.weight);

  std::array<double, kFlagCount> base_logit{};
  std::array<double, kFlagCount> effect{};
  for (std::size_t i = 0; i < kFlagCount; ++i) {
    const std::string name(flag_name(static_cast<Flag>(i)));
    auto br = config.flag_base_rates.find(name);
    base_logit[i] = logit(br == config.flag_base_rates.end() ? 0.05 : br->second);
    auto ef = config.planted_effects.find(name);
    effect[i] = ef == config.planted_effects.end() ? 0.0 : ef->second;
  }

  const BoundingBox& box = config.region;
  const double county_dlat = (box.max_lat - box.min_lat) / config.county_rows;
  const double county_dlon = (box.max_lon - box.min_lon) / config.county_cols;

  std::vector<CrashRecord> out;
  out.reserve(config.n_records);
  for (std::size_t i = 0; i < config.n_records; ++i) {
    const int sev = severities[i];
    CrashRecord r;
    char id[32];
    std::snprintf(id, sizeof(id), "SYN-%07zu", i + 1);
    r.id = id;

    const int month = static_cast<int>(pick_weighted(rng, month_w)) + 1;
    const int day = 1 + static_cast<int>(unit(rng) * days_in_month(config.year, month));
    const int hour = static_cast<int>(pick_weighted(rng, hour_w));
    const int minute = static_cast<int>(unit(rng) * 60.0);
    const int second = static_cast<int>(unit(rng) * 60.0);
    r.occurred_at = from_civil(config.year, month, std::min(day, days_in_month(config.year, month)), hour, minute,
                               second);
    r.hour_of_day = hour;
    r.crash_month = month;
    r.severity = static_cast<Severity>(sev);

    const bool winter = config.seasonal_peak_months.count(month) > 0;
    auto wb = weather_base(winter);
    std::vector<double> ww(wb.begin(), wb.end());
    for (std::size_t c = 2; c < ww.size(); ++c) ww[c] *= std::exp(config.weather_effect * sev);
    const int weather = static_cast<int>(pick_weighted(rng, ww)) + 1;
    r.set_code(CodeField::kWeather1, weather);

    double lat = 0.0, lon = 0.0;
    const std::size_t comp = pick_weighted(rng, component_w);
    if (comp == 0) {
      lat = box.min_lat + unit(rng) * (box.max_lat - box.min_lat);
      lon = box.min_lon + unit(rng) * (box.max_lon - box.min_lon);
    } else {
      const auto& cc = config.cluster_centers[comp - 1];
      do {
        lat = cc.center.lat() + cc.spread_deg * gauss(rng);
        lon = cc.center.lon() + cc.spread_deg * gauss(rng);
      } while (!box.contains(GeoPoint(std::clamp(lat, -90.0, 90.0), std::clamp(lon, -180.0, 180.0))));
    }
    r.location = GeoPoint(lat, lon);
    const int crow = std::min(config.county_rows - 1, static_cast<int>((lat - box.min_lat) / county_dlat));
    const int ccol = std::min(config.county_cols - 1, static_cast<int>((lon - box.min_lon) / county_dlon));
    char county[16];
    std::snprintf(county, sizeof(county), "C%02d", crow * config.county_cols + ccol + 1);
    r.county = county;

    for (std::size_t f = 0; f < kFlagCount; ++f) {
      double z = base_logit[f] + effect[f] * sev;
      const auto flag = static_cast<Flag>(f);
      if (flag == Flag::kIcyRoad && (weather == 4 || weather == 5)) z += 2.0;
      if (flag == Flag::kSnowSlushRoad && weather == 4) z += 2.5;
      if (flag == Flag::kSnowSlushRoad && weather == 5) z += 1.5;
      if (flag == Flag::kWetRoad && weather == 3) z += 2.5;
      if (flag == Flag::kWetRoad && weather == 5) z += 1.0;
      r.flags[f] = unit(rng) < sigmoid(z);
    }

    r.set_code(CodeField::kIllumination, illumination_for(hour, unit(rng)));
    int road = 1;
    if (*r.flag(Flag::kWetRoad)) road = 2;
    if (*r.flag(Flag::kSnowSlushRoad)) road = 3;
    if (*r.flag(Flag::kIcyRoad)) road = 4;
    if (unit(rng) < 0.03) road = 5;
    r.set_code(CodeField::kRoadCondition, road);

    if (config.defect_rate > 0.0 && unit(rng) < config.defect_rate) {
      switch (static_cast<int>(unit(rng) * 3.0)) {
        case 0: r.location.reset(); break;
        case 1: r.location = GeoPoint(0.0, 0.0); break;
        default: r.severity.reset(); break;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::size_t planted_defect_count(const std::vector<CrashRecord>& records, const BoundingBox& region) {
  std::size_t n = 0;
  for (const auto& r : records) {
    if (!r.location || !r.severity || !region.contains(*r.location)) ++n;
  }
  return n;
}

}  // namespace crashcast::pipeline
