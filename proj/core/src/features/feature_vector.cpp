#include "crashcast/features/feature_vector.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "crashcast/error.hpp"

namespace crashcast::features {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::array<std::string_view, kFeatureCount> build_names() {
  std::array<std::string_view, kFeatureCount> n{};
  n[kImpairmentRisk] = "impairment_risk";
  n[kDistractionRisk] = "distraction_risk";
  n[kAdverseRoad] = "adverse_road_conditions";
  n[kWeatherRisk] = "weather_risk";
  n[kTotalEnvironmentalRisk] = "total_environmental_risk";
  n[kEnvironmentalIndex] = "environmental_index";
  n[kWeatherKnnRisk] = "weather_knn_risk";
  n[kHourSin] = "hour_sin";
  n[kHourCos] = "hour_cos";
  n[kMonthSin] = "month_sin";
  n[kMonthCos] = "month_cos";
  n[kClusterDensity] = "cluster_density";
  for (std::size_t i = 0; i < kFlagCount; ++i) n[kFirstFlag + i] = flag_name(static_cast<Flag>(i));
  for (std::size_t i = 0; i < kCodeCount; ++i) n[kFirstCode + i] = code_name(static_cast<CodeField>(i));
  return n;
}

std::optional<int> hour_of(const CrashRecord& r) {
  if (r.hour_of_day) return r.hour_of_day;
  if (r.occurred_at) return to_civil(*r.occurred_at).hour;
  return std::nullopt;
}

std::optional<int> month_of(const CrashRecord& r) {
  if (r.crash_month) return r.crash_month;
  if (r.occurred_at) return to_civil(*r.occurred_at).month;
  return std::nullopt;
}

using nlohmann::json;

json weather_to_json(const WeatherSnapshot& w) {
  return json::array({w.category, w.temperature_c, w.precipitation_mm_hr, w.visibility_km, w.wind_kmh});
}

WeatherSnapshot weather_from_json(const json& j) {
  WeatherSnapshot w;
  w.category = j.at(0).get<int>();
  w.temperature_c = j.at(1).get<double>();
  w.precipitation_mm_hr = j.at(2).get<double>();
  w.visibility_km = j.at(3).get<double>();
  w.wind_kmh = j.at(4).get<double>();
  return w;
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static const auto names = build_names();
  return names;
}

std::string_view factor_group_name(FactorGroup g) noexcept {
  switch (g) {
    case FactorGroup::kWeather: return "weather";
    case FactorGroup::kTemporal: return "temporal";
    case FactorGroup::kHistorical: return "historical";
    case FactorGroup::kBehavioral: return "behavioral";
    case FactorGroup::kGeometry: return "geometry";
  }
  return "unknown";
}

FactorGroup factor_group_of(std::size_t feature) noexcept {
  switch (feature) {
    case kImpairmentRisk:
    case kDistractionRisk: return FactorGroup::kBehavioral;
    case kAdverseRoad: return FactorGroup::kGeometry;
    case kWeatherRisk:
    case kTotalEnvironmentalRisk:
    case kEnvironmentalIndex: return FactorGroup::kWeather;
    case kWeatherKnnRisk:
    case kClusterDensity: return FactorGroup::kHistorical;
    case kHourSin:
    case kHourCos:
    case kMonthSin:
    case kMonthCos: return FactorGroup::kTemporal;
    default: break;
  }
  if (feature >= kFirstCode) {
    return feature - kFirstCode == index_of(CodeField::kRoadCondition) ? FactorGroup::kGeometry : FactorGroup::kWeather;
  }
  switch (static_cast<Flag>(feature - kFirstFlag)) {
    case Flag::kIcyRoad:
    case Flag::kWetRoad:
    case Flag::kSnowSlushRoad:
    case Flag::kLocalRoad:
    case Flag::kCurveDriverError:
    case Flag::kInterstate:
    case Flag::kIntersectionRelated: return FactorGroup::kGeometry;
    default: return FactorGroup::kBehavioral;
  }
}

FeatureContext FeatureContext::fit(std::span<const CrashRecord> records, const FeatureFitOptions& options) {
  options.clusters.validate();
  std::vector<CrashRecord> usable;
  for (const auto& r : records) {
    if (r.location && r.severity) usable.push_back(r);
  }
  if (usable.empty()) throw Error(ErrorCode::kEmptyHistory, "no located, labelled records to fit features");

  FeatureContext ctx;
  ctx.cluster_params = options.clusters;
  ctx.knn_k = options.knn_k;
  if (options.fit_environmental && usable.size() >= 500) {
    try {
      ctx.environmental = fit_environmental_weights(usable, ctx.environmental);
      ctx.environmental_fitted = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateDesign) throw;
    }
  }

  std::vector<GeoPoint> points;
  points.reserve(usable.size());
  for (const auto& r : usable) points.push_back(*r.location);
  const auto labels = dbscan_haversine(points, options.clusters);
  ctx.clusters = ClusterLookup(summarize_clusters(points, labels, options.clusters.eps_km), options.clusters.eps_km);
  ctx.weather_knn = WeatherKnnIndex::from_records(usable, options.knn_max_history);
  return ctx;
}

FeatureVector FeatureContext::assemble(const CrashRecord& r, const std::optional<WeatherSnapshot>& weather) const {
  FeatureVector v;
  v.fill(kNaN);
  v[kImpairmentRisk] = impairment_risk(r, behavioral);
  v[kDistractionRisk] = distraction_risk(r, behavioral);
  const auto env = environmental_features(r, environmental);
  v[kAdverseRoad] = env.adverse_road;
  v[kWeatherRisk] = env.weather_risk;
  v[kTotalEnvironmentalRisk] = env.total;
  const WeatherSnapshot w = weather ? *weather : record_weather(r);
  v[kEnvironmentalIndex] =
      environmental_risk_E(env.weather_risk, env.adverse_road, visibility_factor(w.visibility_km), environmental);
  if (!weather_knn.empty()) v[kWeatherKnnRisk] = weather_knn.risk(w, knn_k, r.id);
  if (const auto h = hour_of(r)) std::tie(v[kHourSin], v[kHourCos]) = cyclical_encode(*h, 24.0);
  if (const auto m = month_of(r)) std::tie(v[kMonthSin], v[kMonthCos]) = cyclical_encode(*m, 12.0);
  v[kClusterDensity] = r.location ? clusters.density_at(*r.location) : 0.0;
  for (std::size_t i = 0; i < kFlagCount; ++i) {
    if (r.flags[i]) v[kFirstFlag + i] = *r.flags[i] ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < kCodeCount; ++i) {
    if (r.codes[i]) v[kFirstCode + i] = static_cast<double>(*r.codes[i]);
  }
  return v;
}

Matrix FeatureContext::assemble_all(std::span<const CrashRecord> records) const {
  Matrix m(records.size(), kFeatureCount);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto v = assemble(records[i]);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

json to_json(const FeatureContext& ctx) {
  json env;
  env["alpha"] = ctx.environmental.alpha;
  env["beta"] = ctx.environmental.beta;
  env["gamma"] = ctx.environmental.gamma;
  env["road_component"] = ctx.environmental.road_component;
  json wm = json::object();
  for (const auto& [code, v] : ctx.environmental.weather_map) wm[std::to_string(code)] = v;
  env["weather_map"] = wm;
  env["weather_default"] = ctx.environmental.weather_default;
  env["compound"] = ctx.environmental.compound;
  env["fitted"] = ctx.environmental_fitted;

  json summary = json::array();
  for (const auto& c : ctx.clusters.clusters()) {
    summary.push_back({{"label", c.label},
                       {"center", {c.center.lat(), c.center.lon()}},
                       {"radius_km", c.radius_km},
                       {"size", c.size},
                       {"density", c.density}});
  }
  const auto& p = ctx.cluster_params;
  json clusters = {{"eps_km", p.eps_km},
                   {"min_samples", p.min_samples},
                   {"adaptive", p.adaptive},
                   {"adapt_bounds", {p.adapt_min, p.adapt_max}},
                   {"density_resolution", p.density_resolution},
                   {"summary", summary}};

  json history = json::array();
  const auto& knn = ctx.weather_knn;
  for (std::size_t i = 0; i < knn.size(); ++i) {
    history.push_back({{"weather", weather_to_json(knn.history()[i])},
                       {"severity", severity_index(knn.severities()[i])},
                       {"id", knn.ids().empty() ? std::string() : knn.ids()[i]}});
  }
  json weather = {{"k", ctx.knn_k}, {"mean", knn.mean()}, {"scale", knn.scale()}, {"history", history}};

  return {{"version", FeatureContext::kVersion},
          {"behavioral", {{"impairment", ctx.behavioral.impairment}, {"distraction", ctx.behavioral.distraction}}},
          {"environmental", env},
          {"clusters", clusters},
          {"weather_knn", weather}};
}

FeatureContext feature_context_from_json(const json& doc) {
  try {
    if (doc.at("version").get<int>() != FeatureContext::kVersion) {
      throw Error(ErrorCode::kMalformedDocument, "unsupported feature context version");
    }
    FeatureContext ctx;
    ctx.behavioral.impairment = doc.at("behavioral").at("impairment").get<std::array<double, 3>>();
    ctx.behavioral.distraction = doc.at("behavioral").at("distraction").get<std::array<double, 3>>();
    const auto& env = doc.at("environmental");
    ctx.environmental.alpha = env.at("alpha").get<double>();
    ctx.environmental.beta = env.at("beta").get<double>();
    ctx.environmental.gamma = env.at("gamma").get<double>();
    ctx.environmental.road_component = env.at("road_component").get<std::array<double, 3>>();
    ctx.environmental.weather_map.clear();
    for (const auto& [code, v] : env.at("weather_map").items()) ctx.environmental.weather_map[std::stoi(code)] = v.get<double>();
    ctx.environmental.weather_default = env.at("weather_default").get<double>();
    ctx.environmental.compound = env.at("compound").get<std::array<double, 2>>();
    ctx.environmental_fitted = env.at("fitted").get<bool>();

    const auto& cl = doc.at("clusters");
    ctx.cluster_params.eps_km = cl.at("eps_km").get<double>();
    ctx.cluster_params.min_samples = cl.at("min_samples").get<int>();
    ctx.cluster_params.adaptive = cl.at("adaptive").get<bool>();
    ctx.cluster_params.adapt_min = cl.at("adapt_bounds").at(0).get<double>();
    ctx.cluster_params.adapt_max = cl.at("adapt_bounds").at(1).get<double>();
    ctx.cluster_params.density_resolution = cl.at("density_resolution").get<int>();
    std::vector<ClusterSummary> summary;
    for (const auto& c : cl.at("summary")) {
      ClusterSummary s;
      s.label = c.at("label").get<int>();
      s.center = GeoPoint(c.at("center").at(0).get<double>(), c.at("center").at(1).get<double>());
      s.radius_km = c.at("radius_km").get<double>();
      s.size = c.at("size").get<std::size_t>();
      s.density = c.at("density").get<double>();
      summary.push_back(s);
    }
    ctx.clusters = ClusterLookup(std::move(summary), ctx.cluster_params.eps_km);

    const auto& wk = doc.at("weather_knn");
    ctx.knn_k = wk.at("k").get<std::size_t>();
    std::vector<WeatherSnapshot> h;
    std::vector<Severity> s;
    std::vector<std::string> ids;
    for (const auto& e : wk.at("history")) {
      h.push_back(weather_from_json(e.at("weather")));
      s.push_back(parse_severity(e.at("severity").get<int>()));
      ids.push_back(e.at("id").get<std::string>());
    }
    if (!h.empty()) ctx.weather_knn = WeatherKnnIndex(std::move(h), std::move(s), std::move(ids));
    return ctx;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("feature context: ") + e.what());
  }
}

}  // namespace crashcast::features
