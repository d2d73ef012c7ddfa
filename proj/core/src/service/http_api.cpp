#include "crashcast/service/http_api.hpp"

#include <cmath>
#include <sstream>

#include <httplib.h>

#include "crashcast/error.hpp"
#include "crashcast/pipeline/quality.hpp"

namespace crashcast::service {

namespace {

HttpResponse json_response(int status, const nlohmann::json& body) {
  return HttpResponse{status, body.dump(), "application/json"};
}

HttpResponse error_response(int status, std::string_view code, const std::string& message) {
  return json_response(status, {{"error", code}, {"message", message}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedDocument:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kMissingHeader:
      return 400;
    case ErrorCode::kInvalidCoordinate:
    case ErrorCode::kOutOfRangeSeverity:
    case ErrorCode::kComponentOutOfRange:
      return 422;
    case ErrorCode::kUnfittedModel:
      return 503;
    case ErrorCode::kStorageFull:
      return 507;
    default:
      return 500;
  }
}

double query_double(const HttpRequest& r, const std::string& key) {
  const auto it = r.query.find(key);
  if (it == r.query.end()) throw Error(ErrorCode::kInvalidArgument, "missing query parameter " + key);
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size() || !std::isfinite(v)) throw std::invalid_argument(key);
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kInvalidArgument, "bad number for " + key);
  }
}

std::optional<Timestamp> query_time(const HttpRequest& r, const std::string& key) {
  const auto it = r.query.find(key);
  if (it == r.query.end() || it->second.empty()) return std::nullopt;
  const auto t = parse_iso8601(it->second);
  if (!t) throw Error(ErrorCode::kInvalidArgument, "bad timestamp for " + key);
  return t;
}

std::size_t query_size(const HttpRequest& r, const std::string& key, std::size_t fallback) {
  const auto it = r.query.find(key);
  if (it == r.query.end()) return fallback;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (used != it->second.size() || v < 0) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kInvalidArgument, "bad integer for " + key);
  }
}

BoundingBox query_box(const HttpRequest& r) {
  BoundingBox box{query_double(r, "min_lat"), query_double(r, "min_lon"), query_double(r, "max_lat"),
                  query_double(r, "max_lon")};
  if (!box.valid()) throw Error(ErrorCode::kInvalidArgument, "invalid bounding box");
  return box;
}

}  // namespace

nlohmann::json record_to_json(const CrashRecord& r) {
  nlohmann::json flags = nlohmann::json::object();
  for (std::size_t f = 0; f < kFlagCount; ++f) {
    flags[std::string(flag_name(static_cast<Flag>(f)))] = r.flags[f] ? nlohmann::json(*r.flags[f]) : nlohmann::json();
  }
  nlohmann::json codes = nlohmann::json::object();
  for (std::size_t c = 0; c < kCodeCount; ++c) {
    codes[std::string(code_name(static_cast<CodeField>(c)))] = r.codes[c] ? nlohmann::json(*r.codes[c]) : nlohmann::json();
  }
  const auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"id", r.id},
          {"lat", r.location ? nlohmann::json(r.location->lat()) : nlohmann::json()},
          {"lon", r.location ? nlohmann::json(r.location->lon()) : nlohmann::json()},
          {"occurred_at", r.occurred_at ? nlohmann::json(format_iso8601(*r.occurred_at)) : nlohmann::json()},
          {"hour_of_day", opt(r.hour_of_day)},
          {"crash_month", opt(r.crash_month)},
          {"severity", r.severity ? nlohmann::json(static_cast<int>(*r.severity)) : nlohmann::json()},
          {"county", r.county},
          {"flags", flags},
          {"codes", codes}};
}

CrashRecord record_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kMalformedDocument, "crash record must be an object");
  CrashRecord r;
  try {
    r.id = doc.value("id", std::string());
    r.county = doc.value("county", std::string());
    const bool has_lat = doc.contains("lat") && !doc.at("lat").is_null();
    const bool has_lon = doc.contains("lon") && !doc.at("lon").is_null();
    if (has_lat != has_lon) throw Error(ErrorCode::kMalformedDocument, "lat and lon must come together");
    if (has_lat) {
      const double lat = doc.at("lat").get<double>(), lon = doc.at("lon").get<double>();
      if (!GeoPoint::valid(lat, lon)) throw Error(ErrorCode::kInvalidCoordinate, "coordinates out of range");
      r.location = GeoPoint(lat, lon);
    }
    if (doc.contains("occurred_at") && !doc.at("occurred_at").is_null()) {
      r.occurred_at = parse_iso8601(doc.at("occurred_at").get<std::string>());
      if (!r.occurred_at) throw Error(ErrorCode::kMalformedDocument, "bad occurred_at");
      const auto civil = to_civil(*r.occurred_at);
      r.hour_of_day = civil.hour;
      r.crash_month = civil.month;
    }
    if (doc.contains("hour_of_day") && !doc.at("hour_of_day").is_null()) r.hour_of_day = doc.at("hour_of_day").get<int>();
    if (doc.contains("crash_month") && !doc.at("crash_month").is_null()) r.crash_month = doc.at("crash_month").get<int>();
    if ((r.hour_of_day && (*r.hour_of_day < 0 || *r.hour_of_day > 23)) ||
        (r.crash_month && (*r.crash_month < 1 || *r.crash_month > 12))) {
      throw Error(ErrorCode::kComponentOutOfRange, "hour or month out of range");
    }
    if (doc.contains("severity") && !doc.at("severity").is_null()) r.severity = parse_severity(doc.at("severity").get<int>());
    if (doc.contains("flags")) {
      for (const auto& [name, value] : doc.at("flags").items()) {
        const auto flag = flag_from_name(name);
        if (!flag) throw Error(ErrorCode::kMalformedDocument, "unknown flag " + name);
        if (!value.is_null()) r.set_flag(*flag, value.get<bool>());
      }
    }
    if (doc.contains("codes")) {
      for (const auto& [name, value] : doc.at("codes").items()) {
        const auto code = code_from_name(name);
        if (!code) throw Error(ErrorCode::kMalformedDocument, "unknown code " + name);
        if (!value.is_null()) r.set_code(*code, value.get<int>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
  return r;
}

HttpResponse HttpApi::handle(const HttpRequest& request) {
  const auto& p = request.path;
  const auto& m = request.method;
  const bool known = p == "/predict" || p == "/hotspots" || p == "/crashes" || p == "/health" || p == "/metrics";
  if (!known) return error_response(404, "NotFound", p);
  try {
    if (p == "/predict" && m == "POST") return predict(request);
    if (p == "/hotspots" && m == "GET") return hotspots(request);
    if (p == "/crashes" && m == "POST") return post_crashes(request);
    if (p == "/crashes" && m == "GET") return get_crashes(request);
    if (p == "/health" && m == "GET") return json_response(200, service_.health());
    if (p == "/metrics" && m == "GET") return json_response(200, service_.metrics());
    return error_response(405, "MethodNotAllowed", m + " " + p);
  } catch (const Error& e) {
    if (p == "/predict") service_.record_rejected();
    return error_response(status_for(e.code()), error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

HttpResponse HttpApi::predict(const HttpRequest& request) {
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(request.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
  const auto parsed = parse_prediction_request(body);
  return HttpResponse{200, response_body(service_.predict(parsed)), "application/json"};
}

HttpResponse HttpApi::hotspots(const HttpRequest& request) {
  const auto box = query_box(request);
  const auto k = std::min(query_size(request, "k", 10), service_.config().max_hotspots);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& h : service_.hotspots(box, query_time(request, "at"), k)) out.push_back(to_json(h));
  return json_response(200, {{"hotspots", out}});
}

HttpResponse HttpApi::post_crashes(const HttpRequest& request) {
  std::vector<CrashRecord> records;
  const bool csv = request.content_type.find("csv") != std::string::npos;
  if (csv) {
    std::istringstream in(request.body);
    auto parsed = pipeline::ingest_csv(in);
    if (!parsed.errors.empty()) {
      nlohmann::json errors = nlohmann::json::array();
      for (const auto& e : parsed.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
      return json_response(400, {{"error", "MalformedDocument"}, {"message", "rows failed to parse"}, {"rows", errors}});
    }
    records = std::move(parsed.records);
  } else {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(request.body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedDocument, e.what());
    }
    if (!body.is_array()) throw Error(ErrorCode::kMalformedDocument, "expected a JSON array of crash records");
    for (const auto& item : body) records.push_back(record_from_json(item));
  }
  for (const auto& r : records) {
    if (!r.location) throw Error(ErrorCode::kInvalidCoordinate, "record '" + r.id + "' has no location");
  }
  const auto stored = service_.ingest(records);
  return json_response(201, {{"stored", stored}, {"total", service_.store().size()}});
}

HttpResponse HttpApi::get_crashes(const HttpRequest& request) {
  const auto box = query_box(request);
  const auto limit = query_size(request, "limit", 10000);
  const auto records = service_.store().query(box, query_time(request, "from"), query_time(request, "to"));
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < records.size() && i < limit; ++i) out.push_back(record_to_json(records[i]));
  return json_response(200, {{"count", records.size()}, {"crashes", out}});
}

struct HttpServer::Impl {
  HttpApi& api;
  httplib::Server server;
  std::thread thread;
  explicit Impl(HttpApi& a) : api(a) {}
};

HttpServer::HttpServer(HttpApi& api, std::size_t threads) : impl_(std::make_unique<Impl>(api)) {
  auto& s = impl_->server;
  s.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  s.set_keep_alive_max_count(1000000);
  s.set_keep_alive_timeout(30);
  s.set_payload_max_length(256u << 20);
  // Responses go out in separate header and body writes; without this the
  // second write waits on the client's delayed ACK.
  s.set_tcp_nodelay(true);
  const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query[k] = v;
    r.body = req.body;
    r.content_type = req.get_header_value("Content-Type");
    const auto out = impl_->api.handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  const std::string any = R"(/.*)";
  s.Get(any, handler);
  s.Post(any, handler);
  s.Put(any, handler);
  s.Delete(any, handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& s = impl_->server;
  const int bound = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(ErrorCode::kInvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace crashcast::service
