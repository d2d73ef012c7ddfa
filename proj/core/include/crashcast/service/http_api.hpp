#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "crashcast/record.hpp"
#include "crashcast/service/prediction_service.hpp"

namespace crashcast::service {

nlohmann::json record_to_json(const CrashRecord& r);
// Throws kMalformedDocument, kInvalidCoordinate, kOutOfRangeSeverity.
CrashRecord record_from_json(const nlohmann::json& doc);

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string content_type;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Routes the JSON API onto a PredictionService; no sockets involved.
//   POST /predict, GET /hotspots, POST /crashes, GET /crashes, GET /health,
//   GET /metrics
// Errors are JSON {"error": code, "message": text}: 400 malformed input, 404
// unknown route, 405 wrong method, 422 out-of-range values, 503 no model.
class HttpApi {
 public:
  explicit HttpApi(PredictionService& service) : service_(service) {}
  HttpResponse handle(const HttpRequest& request);

 private:
  HttpResponse predict(const HttpRequest& request);
  HttpResponse hotspots(const HttpRequest& request);
  HttpResponse post_crashes(const HttpRequest& request);
  HttpResponse get_crashes(const HttpRequest& request);

  PredictionService& service_;
};

// cpp-httplib server running HttpApi on a worker pool.
class HttpServer {
 public:
  HttpServer(HttpApi& api, std::size_t threads);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws kInvalidArgument
  // when binding fails.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void start();   // listen() on a background thread
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace crashcast::service
