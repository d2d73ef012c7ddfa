#include "crashcast/service/prediction_service.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crashcast/boosting/ensemble.hpp"
#include "crashcast/error.hpp"

namespace crashcast::service {

using features::FactorGroup;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

int illumination_for_hour(int hour) {
  // 1 daylight, 3 dark-lit, 4 dusk, 5 dawn
  if (hour >= 7 && hour <= 17) return 1;
  if (hour == 5 || hour == 6) return 5;
  if (hour == 18 || hour == 19) return 4;
  return 3;
}

double percentile(std::vector<double> sorted_values, double q) {
  if (sorted_values.empty()) return 0.0;
  std::sort(sorted_values.begin(), sorted_values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted_values.size())));
  return sorted_values[std::clamp<std::size_t>(rank, 1, sorted_values.size()) - 1];
}

nlohmann::json weather_json(const WeatherSnapshot& w) {
  return {{"category", w.category},
          {"condition", weather_category_name(w.category)},
          {"temperature_c", w.temperature_c},
          {"precipitation_mm_hr", w.precipitation_mm_hr},
          {"visibility_km", w.visibility_km},
          {"wind_kmh", w.wind_kmh}};
}

double finite_or(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw Error(ErrorCode::kMalformedDocument, std::string(key) + " must be a number");
  return j.at(key).get<double>();
}

}  // namespace

void ServiceConfig::validate() const {
  if (serving_resolution < 0 || serving_resolution > kMaxCellResolution || store_index_resolution < 0 ||
      store_index_resolution > kMaxCellResolution) {
    throw Error(ErrorCode::kInvalidArgument, "cell resolutions must lie in 0..12");
  }
  secondary.validate();
  if (refresh_period.count() <= 0) throw Error(ErrorCode::kInvalidArgument, "refresh period must be positive");
  if (!(display_radius_base_m > 0.0)) throw Error(ErrorCode::kInvalidArgument, "display radius base must be positive");
  if (drift_window == 0 || latency_window == 0 || server_threads == 0 || max_hotspots == 0) {
    throw Error(ErrorCode::kInvalidArgument, "windows, thread count and hotspot limit must be positive");
  }
}

ServiceConfig ServiceConfig::parse(std::istream& in) {
  ServiceConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = "service config line " + std::to_string(line_no);
    if (eq == std::string::npos) throw Error(ErrorCode::kInvalidArgument, where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      const auto as_double = [&] {
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      };
      const auto as_size = [&] {
        const auto v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
      };
      if (key == "serving_resolution") c.serving_resolution = static_cast<int>(as_size());
      else if (key == "store_index_resolution") c.store_index_resolution = static_cast<int>(as_size());
      else if (key == "secondary_capacity") c.secondary.capacity = as_size();
      else if (key == "pin_confidence") c.secondary.pin_confidence = as_double();
      else if (key == "pin_fraction_max") c.secondary.pin_fraction_max = as_double();
      else if (key == "refresh_period_s") c.refresh_period = std::chrono::seconds(as_size());
      else if (key == "recommendations_path") c.recommendations_path = value;
      else if (key == "display_radius_base_m") c.display_radius_base_m = as_double();
      else if (key == "drift_window") c.drift_window = as_size();
      else if (key == "latency_window") c.latency_window = as_size();
      else if (key == "server_threads") c.server_threads = as_size();
      else if (key == "max_hotspots") c.max_hotspots = as_size();
      else throw Error(ErrorCode::kInvalidArgument, where + ": unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidArgument, where + ": bad value for " + key);
    }
  }
  c.validate();
  return c;
}

ServiceConfig ServiceConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot open service config " + path);
  return parse(in);
}

PredictionRequest parse_prediction_request(const nlohmann::json& body) {
  if (!body.is_object()) throw Error(ErrorCode::kMalformedDocument, "request body must be a JSON object");
  PredictionRequest r;
  try {
    const auto& loc = body.at("location");
    if (!loc.is_object() || !loc.at("lat").is_number() || !loc.at("lon").is_number()) {
      throw Error(ErrorCode::kMalformedDocument, "location needs numeric lat and lon");
    }
    const double lat = loc.at("lat").get<double>();
    const double lon = loc.at("lon").get<double>();
    if (!GeoPoint::valid(lat, lon) || (lat == 0.0 && lon == 0.0)) {
      throw Error(ErrorCode::kInvalidCoordinate, "coordinates out of range");
    }
    r.location = GeoPoint(lat, lon);
    if (body.contains("at") && !body.at("at").is_null()) {
      if (!body.at("at").is_string()) throw Error(ErrorCode::kMalformedDocument, "at must be an ISO-8601 string");
      r.at = parse_iso8601(body.at("at").get<std::string>());
      if (!r.at) throw Error(ErrorCode::kMalformedDocument, "at must be an ISO-8601 string");
    }
    if (body.contains("weather_override") && !body.at("weather_override").is_null()) {
      const auto& w = body.at("weather_override");
      if (!w.is_object() || !w.at("category").is_number_integer()) {
        throw Error(ErrorCode::kMalformedDocument, "weather_override needs an integer category");
      }
      const int category = w.at("category").get<int>();
      if (category < 1 || category > kWeatherCategoryCount) {
        throw Error(ErrorCode::kComponentOutOfRange, "weather category must be 1..6");
      }
      WeatherSnapshot snap = nominal_weather(category);
      snap.temperature_c = finite_or(w, "temperature_c", snap.temperature_c);
      snap.precipitation_mm_hr = finite_or(w, "precipitation_mm_hr", snap.precipitation_mm_hr);
      snap.visibility_km = finite_or(w, "visibility_km", snap.visibility_km);
      snap.wind_kmh = finite_or(w, "wind_kmh", snap.wind_kmh);
      try {
        snap.validate();
      } catch (const Error& e) {
        throw Error(ErrorCode::kComponentOutOfRange, e.what());
      }
      r.weather_override = snap;
    }
    if (body.contains("flags_override") && !body.at("flags_override").is_null()) {
      const auto& flags = body.at("flags_override");
      if (!flags.is_object()) throw Error(ErrorCode::kMalformedDocument, "flags_override must be an object");
      for (const auto& [name, value] : flags.items()) {
        const auto flag = flag_from_name(name);
        if (!flag) throw Error(ErrorCode::kMalformedDocument, "unknown flag " + name);
        if (!value.is_boolean()) throw Error(ErrorCode::kMalformedDocument, "flag " + name + " must be boolean");
        r.flags_override[*flag] = value.get<bool>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
  return r;
}

nlohmann::json to_json(const PredictionRequest& r) {
  nlohmann::json doc = {{"location", {{"lat", r.location.lat()}, {"lon", r.location.lon()}}}};
  if (r.at) doc["at"] = format_iso8601(*r.at);
  if (r.weather_override) {
    const auto& w = *r.weather_override;
    doc["weather_override"] = {{"category", w.category},
                               {"temperature_c", w.temperature_c},
                               {"precipitation_mm_hr", w.precipitation_mm_hr},
                               {"visibility_km", w.visibility_km},
                               {"wind_kmh", w.wind_kmh}};
  }
  if (!r.flags_override.empty()) {
    auto& flags = doc["flags_override"];
    for (const auto& [flag, value] : r.flags_override) flags[std::string(flag_name(flag))] = value;
  }
  return doc;
}

std::string_view cache_tier_name(CacheTier t) noexcept {
  switch (t) {
    case CacheTier::kPrimary: return "PRIMARY";
    case CacheTier::kSecondary: return "SECONDARY";
    case CacheTier::kMiss: return "MISS";
  }
  return "MISS";
}

nlohmann::json core_json(const CachedPrediction& c) {
  nlohmann::json factors = nlohmann::json::object();
  for (std::size_t g = 0; g < features::kFactorGroupCount; ++g) {
    factors[std::string(features::factor_group_name(static_cast<FactorGroup>(g)))] = c.contributing_factors[g];
  }
  nlohmann::json feats = nlohmann::json::object();
  const auto& names = features::feature_names();
  for (std::size_t i = 0; i < features::kFeatureCount; ++i) {
    feats[std::string(names[i])] = std::isfinite(c.features[i]) ? nlohmann::json(c.features[i]) : nlohmann::json();
  }
  return {{"risk_score", c.risk_score},
          {"risk_tier", risk_tier_name(risk_tier(c.risk_score))},
          {"severity_probs", c.severity_probs},
          {"predicted_severity", severity_name(static_cast<Severity>(c.predicted_class))},
          {"confidence", c.confidence},
          {"contributing_factors", factors},
          {"dominant_factor", features::factor_group_name(c.dominant_factor)},
          {"recommended_actions", c.recommended_actions},
          {"weather", weather_json(c.weather)},
          {"features", feats}};
}

nlohmann::json to_json(const PredictionResponse& r) {
  nlohmann::json doc = core_json(*r.core);
  doc["cache_tier"] = cache_tier_name(r.tier);
  doc["latency_ms"] = r.latency_ms;
  doc["cell"] = r.cell.to_string();
  doc["time_bucket"] = r.bucket;
  return doc;
}

std::string response_body(const PredictionResponse& r) {
  std::string out = R"({"cache_tier":")";
  out += cache_tier_name(r.tier);
  out += R"(","cell":")";
  out += r.cell.to_string();
  out += R"(","latency_ms":)";
  out += nlohmann::json(r.latency_ms).dump();
  out += R"(,"time_bucket":)";
  out += std::to_string(r.bucket);
  out += ',';
  out += r.core->json_fields;
  out += '}';
  return out;
}

nlohmann::json to_json(const Hotspot& h) {
  return {{"cell", h.cell.to_string()},
          {"center", {{"lat", h.center.lat()}, {"lon", h.center.lon()}}},
          {"risk_score", h.risk_score},
          {"dominant_factor", features::factor_group_name(h.dominant_factor)},
          {"expected_impact", h.expected_impact},
          {"display_radius_m", h.display_radius_m}};
}

CrashRecord scenario_record(const GeoPoint& point, Timestamp at, const WeatherSnapshot& weather,
                            const FlagOverrides& overrides) {
  CrashRecord r;
  r.location = point;
  r.occurred_at = at;
  const auto civil = to_civil(at);
  r.hour_of_day = civil.hour;
  r.crash_month = civil.month;
  for (std::size_t f = 0; f < kFlagCount; ++f) r.flags[f] = false;
  const int w = weather.category;
  r.set_flag(Flag::kWetRoad, w == 3 || w == 5);
  r.set_flag(Flag::kSnowSlushRoad, w == 4);
  r.set_flag(Flag::kIcyRoad, w == 5);
  for (const auto& [flag, value] : overrides) r.set_flag(flag, value);
  int road = 1;
  if (*r.flag(Flag::kWetRoad)) road = 2;
  if (*r.flag(Flag::kSnowSlushRoad)) road = 3;
  if (*r.flag(Flag::kIcyRoad)) road = 4;
  r.set_code(CodeField::kWeather1, w);
  r.set_code(CodeField::kIllumination, illumination_for_hour(civil.hour));
  r.set_code(CodeField::kRoadCondition, road);
  return r;
}

double display_radius(double base_m, double risk_score, double expected_impact) {
  return base_m * std::sqrt(std::max(0.0, risk_score * expected_impact));
}

PredictionService::PredictionService(std::shared_ptr<const ModelBundle> model, std::shared_ptr<CrashStore> store,
                                     std::shared_ptr<const WeatherSource> weather, std::shared_ptr<const Clock> clock,
                                     ServiceConfig config, RecommendationTable recommendations)
    : store_(std::move(store)),
      weather_(std::move(weather)),
      clock_(std::move(clock)),
      config_(std::move(config)),
      recommendations_(std::move(recommendations)),
      secondary_(config_.secondary) {
  config_.validate();
  if (!store_ || !weather_ || !clock_) throw Error(ErrorCode::kInvalidArgument, "store, weather and clock are required");
  for (const auto& cell : store_->active_cells(config_.serving_resolution)) active_.insert(cell);
  load_model(std::move(model));
}

void PredictionService::load_model(std::shared_ptr<const ModelBundle> model) {
  {
    std::lock_guard lock(model_mutex_);
    model_ = std::move(model);
  }
  primary_.publish(nullptr);
  secondary_.clear();
  std::lock_guard lock(drift_mutex_);
  const auto m = this->model();
  if (m && m->baseline.samples > 0) {
    drift_.emplace(m->baseline.accuracy, std::nullopt, config_.drift_window);
  } else {
    drift_.reset();
  }
}

std::shared_ptr<const ModelBundle> PredictionService::model() const {
  std::lock_guard lock(model_mutex_);
  return model_;
}

WeatherSnapshot PredictionService::weather_at(const GeoPoint& where, Timestamp at) const {
  try {
    return weather_->current(where, at);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kWeatherSourceUnavailable) throw;
    weather_fallbacks_.fetch_add(1, std::memory_order_relaxed);
    WeatherSnapshot w = nominal_weather(1);
    w.observed_at = at;
    return w;
  }
}

CacheKey PredictionService::key_for(const PredictionRequest& request, Timestamp at,
                                    const WeatherSnapshot& weather) const {
  CacheKey key;
  key.cell = cell_of(request.location, config_.serving_resolution).key();
  key.bucket = time_bucket_15m(at);
  key.weather = weather.category;
  if (request.has_overrides()) {
    nlohmann::json overrides = to_json(request);
    overrides.erase("location");
    overrides.erase("at");
    key.variant = std::hash<std::string>{}(overrides.dump()) | 1u;
  }
  return key;
}

PredictionPtr PredictionService::compute_record(const CrashRecord& record, const WeatherSnapshot& weather) const {
  const auto bundle = model();
  if (!bundle) throw Error(ErrorCode::kUnfittedModel, "no model loaded");
  const auto t0 = std::chrono::steady_clock::now();
  const auto x = bundle->features_for(record, weather);
  feature_ns_.fetch_add(static_cast<std::uint64_t>(
                            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
                                .count()),
                        std::memory_order_relaxed);
  feature_computations_.fetch_add(1, std::memory_order_relaxed);
  const auto ctx = bundle->context_for(record, weather);
  const auto pred = bundle->ensemble.predict(x, ctx);

  auto out = std::make_shared<CachedPrediction>();
  for (std::size_t s = 0; s < kSeverityCount; ++s) out->severity_probs[s] = pred.probabilities[s];
  out->risk_score = std::clamp(1.0 - pred.probabilities[0], 0.0, 1.0);
  out->confidence = pred.confidence;
  out->predicted_class = pred.predicted_class;
  out->features = x;
  out->weather = weather;
  out->computed_at = clock_->now();

  // Factor mass of the Minor margin, which risk_score decreases in.
  const auto attribution = boosting::attribute_prediction(bundle->ensemble, x, 0, ctx);
  double mass = 0.0;
  for (std::size_t g = 0; g < features::kFactorGroupCount; ++g) {
    const auto it = attribution.grouped.find(std::string(features::factor_group_name(static_cast<FactorGroup>(g))));
    out->contributing_factors[g] = it == attribution.grouped.end() ? 0.0 : std::abs(it->second);
    mass += out->contributing_factors[g];
  }
  for (auto& v : out->contributing_factors) {
    v = mass > 0.0 ? v / mass : 1.0 / static_cast<double>(features::kFactorGroupCount);
  }
  out->dominant_factor = static_cast<FactorGroup>(
      std::max_element(out->contributing_factors.begin(), out->contributing_factors.end()) -
      out->contributing_factors.begin());
  out->recommended_actions = recommendations_.recommend(out->risk_score, out->dominant_factor);
  const std::string body = core_json(*out).dump();
  out->json_fields = body.substr(1, body.size() - 2);
  return out;
}

PredictionPtr PredictionService::compute(const CellId& cell, Timestamp at, const WeatherSnapshot& weather,
                                         const FlagOverrides& overrides) const {
  const Timestamp bucket_time = bucket_start_15m(time_bucket_15m(at));
  return compute_record(scenario_record(cell.center(), bucket_time, weather, overrides), weather);
}

PredictionPtr PredictionService::compute_at(const GeoPoint& point, Timestamp at, const WeatherSnapshot& weather,
                                            const FlagOverrides& overrides) const {
  return compute_record(scenario_record(point, at, weather, overrides), weather);
}

PredictionResponse PredictionService::predict(const PredictionRequest& request) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!model()) throw Error(ErrorCode::kUnfittedModel, "no model loaded");
  const Timestamp at = request.at.value_or(clock_->now());
  const WeatherSnapshot weather = request.weather_override ? *request.weather_override : weather_at(request.location, at);
  const CacheKey key = key_for(request, at, weather);

  PredictionResponse response;
  response.cell = CellId::from_key(key.cell);
  response.bucket = key.bucket;
  if (!request.has_overrides()) {
    if (const auto gen = primary_.current()) response.core = gen->find(key);
    if (response.core) response.tier = CacheTier::kPrimary;
  }
  if (!response.core) {
    response.core = secondary_.lookup(key);
    if (response.core) response.tier = CacheTier::kSecondary;
  }
  if (!response.core) {
    response.core = compute(response.cell, at, weather, request.flags_override);
    secondary_.insert(key, response.core, response.core->confidence);
    response.tier = CacheTier::kMiss;
  }
  switch (response.tier) {
    case CacheTier::kPrimary: primary_hits_.fetch_add(1, std::memory_order_relaxed); break;
    case CacheTier::kSecondary: secondary_hits_.fetch_add(1, std::memory_order_relaxed); break;
    case CacheTier::kMiss: misses_.fetch_add(1, std::memory_order_relaxed); break;
  }
  response.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  record_latency(response.latency_ms);
  return response;
}

std::vector<Hotspot> PredictionService::hotspots(const BoundingBox& box, std::optional<Timestamp> at, std::size_t k) {
  if (!box.valid()) throw Error(ErrorCode::kInvalidArgument, "invalid bounding box");
  if (!model()) throw Error(ErrorCode::kUnfittedModel, "no model loaded");
  hotspot_requests_.fetch_add(1, std::memory_order_relaxed);
  const Timestamp when = at.value_or(clock_->now());
  const auto gen = primary_.current();
  std::vector<Hotspot> out;
  for (const auto& cell : active_cells()) {
    if (!box.intersects(cell)) continue;
    PredictionRequest request;
    request.location = cell.center();
    const auto weather = weather_at(request.location, when);
    const auto key = key_for(request, when, weather);
    PredictionPtr p = gen ? gen->find(key) : nullptr;
    if (!p) p = secondary_.lookup(key);
    if (!p) {
      p = compute(cell, when, weather);
      secondary_.insert(key, p, p->confidence);
    }
    Hotspot h;
    h.cell = cell;
    h.center = cell.center();
    h.risk_score = p->risk_score;
    h.dominant_factor = p->dominant_factor;
    for (std::size_t s = 0; s < kSeverityCount; ++s) h.expected_impact += p->severity_probs[s] * static_cast<double>(s);
    h.display_radius_m = display_radius(config_.display_radius_base_m, h.risk_score, h.expected_impact);
    out.push_back(h);
  }
  std::sort(out.begin(), out.end(), [](const Hotspot& a, const Hotspot& b) {
    if (a.risk_score != b.risk_score) return a.risk_score > b.risk_score;
    return a.cell.key() < b.cell.key();
  });
  if (out.size() > k) out.resize(k);
  return out;
}

RefreshResult PredictionService::refresh_primary() {
  std::lock_guard lock(refresh_mutex_);
  const auto t0 = std::chrono::steady_clock::now();
  if (!model()) throw Error(ErrorCode::kUnfittedModel, "no model loaded");
  const Timestamp now = clock_->now();
  auto gen = std::make_shared<PrimaryGeneration>();
  gen->bucket = time_bucket_15m(now);
  gen->computed_at = now;
  try {
    for (const auto& cell : active_cells()) {
      const auto weather = weather_->current(cell.center(), now);
      gen->entries.emplace(cell.key(), compute(cell, now, weather));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kWeatherSourceUnavailable) {
      stale_ = true;
      refresh_failures_.fetch_add(1, std::memory_order_relaxed);
    }
    throw;
  }
  gen->id = ++generation_counter_;
  RefreshResult result{gen->id, gen->entries.size(), 0.0};
  primary_.publish(std::move(gen));
  secondary_.release_pins_before(time_bucket_15m(now));
  last_refresh_ = now.time_since_epoch().count();
  refreshed_once_ = true;
  stale_ = false;
  refreshes_.fetch_add(1, std::memory_order_relaxed);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

bool PredictionService::refresh_if_due() {
  const Timestamp now = clock_->now();
  const auto gen = primary_.current();
  const bool due = !refreshed_once_ || !gen || gen->bucket != time_bucket_15m(now) ||
                   now.time_since_epoch().count() - last_refresh_.load() >= config_.refresh_period.count();
  if (!due || !model()) return false;
  try {
    refresh_primary();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kWeatherSourceUnavailable) throw;
    return false;
  }
  return true;
}

std::size_t PredictionService::ingest(std::span<const CrashRecord> records) {
  store_->insert(records);
  {
    std::lock_guard lock(active_mutex_);
    for (const auto& r : records) active_.insert(cell_of(*r.location, config_.serving_resolution));
  }
  ingested_.fetch_add(records.size(), std::memory_order_relaxed);
  const auto bundle = model();
  if (bundle) {
    std::lock_guard lock(drift_mutex_);
    if (drift_) {
      for (const auto& r : records) {
        if (!r.severity) continue;
        const auto pred = bundle->predict(r);
        drift_->update(pred.predicted_class, static_cast<int>(*r.severity));
      }
    }
  }
  return records.size();
}

std::vector<CellId> PredictionService::active_cells() const {
  std::lock_guard lock(active_mutex_);
  return {active_.begin(), active_.end()};
}

void PredictionService::record_latency(double ms) {
  std::lock_guard lock(latency_mutex_);
  if (latencies_.size() < config_.latency_window) {
    latencies_.push_back(ms);
  } else {
    latencies_[latency_head_] = ms;
    latency_head_ = (latency_head_ + 1) % latencies_.size();
  }
}

nlohmann::json PredictionService::metrics() const {
  const std::uint64_t primary = primary_hits_.load(), secondary = secondary_hits_.load(), miss = misses_.load();
  const std::uint64_t total = primary + secondary + miss;
  const auto rate = [&](std::uint64_t n) { return total == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(total); };
  std::vector<double> window;
  {
    std::lock_guard lock(latency_mutex_);
    window = latencies_;
  }
  const auto gen = primary_.current();
  const std::uint64_t feature_count = feature_computations_.load();
  nlohmann::json drift = nullptr;
  {
    std::lock_guard lock(drift_mutex_);
    if (drift_) drift = evaluation::to_json(drift_->snapshot());
  }
  return {
      {"requests",
       {{"total", total},
        {"primary", primary},
        {"secondary", secondary},
        {"miss", miss},
        {"rejected", rejected_.load()},
        {"hotspots", hotspot_requests_.load()}}},
      {"hit_rate", {{"primary", rate(primary)}, {"secondary", rate(secondary)}, {"combined", rate(primary + secondary)}}},
      {"latency_ms",
       {{"p50", percentile(window, 0.50)},
        {"p95", percentile(window, 0.95)},
        {"p99", percentile(window, 0.99)},
        {"window", window.size()}}},
      {"feature_computation",
       {{"count", feature_count},
        {"mean_us", feature_count == 0 ? 0.0 : static_cast<double>(feature_ns_.load()) / 1000.0 /
                                                   static_cast<double>(feature_count)}}},
      {"cache",
       {{"primary_entries", gen ? gen->entries.size() : 0},
        {"primary_generation", gen ? gen->id : 0},
        {"secondary_size", secondary_.size()},
        {"secondary_capacity", secondary_.config().capacity},
        {"secondary_pinned", secondary_.pinned()}}},
      {"refresh",
       {{"count", refreshes_.load()},
        {"failures", refresh_failures_.load()},
        {"last_refresh",
         refreshed_once_ ? nlohmann::json(format_iso8601(Timestamp{std::chrono::seconds{last_refresh_.load()}}))
                         : nlohmann::json()},
        {"stale", stale_.load()}}},
      {"weather_fallbacks", weather_fallbacks_.load()},
      {"drift", drift},
      {"store", {{"records", store_->size()}, {"active_cells", active_cells().size()}, {"ingested", ingested_.load()}}}};
}

nlohmann::json PredictionService::health() const {
  const bool loaded = model() != nullptr;
  return {{"status", loaded ? "ok" : "model_not_loaded"},
          {"model_loaded", loaded},
          {"primary_ready", primary_.current() != nullptr},
          {"stale", stale_.load()},
          {"time", format_iso8601(clock_->now())}};
}

}  // namespace crashcast::service
