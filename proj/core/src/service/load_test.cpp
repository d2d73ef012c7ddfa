#include "crashcast/service/load_test.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include <httplib.h>

#include "crashcast/error.hpp"

namespace crashcast::service {

namespace {

nlohmann::json get_json(httplib::Client& client, const std::string& path) {
  const auto res = client.Get(path);
  if (!res) throw Error(ErrorCode::kServiceUnreachable, "GET " + path + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(ErrorCode::kServiceUnreachable, "GET " + path + ": HTTP " + std::to_string(res->status));
  return nlohmann::json::parse(res->body);
}

TierCounts server_counts(httplib::Client& client) {
  const auto m = get_json(client, "/metrics");
  const auto& r = m.at("requests");
  return {r.at("primary").get<std::uint64_t>(), r.at("secondary").get<std::uint64_t>(), r.at("miss").get<std::uint64_t>()};
}

}  // namespace

ZipfSampler::ZipfSampler(std::size_t n, double exponent) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "Zipf support must be nonempty");
  if (!(exponent >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "Zipf exponent must be nonnegative");
  cumulative_.resize(n);
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    sum += std::pow(static_cast<double>(r + 1), -exponent);
    cumulative_[r] = sum;
  }
  for (auto& c : cumulative_) c /= sum;
  cumulative_.back() = 1.0;
}

std::size_t ZipfSampler::operator()(std::mt19937_64& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
}

double ZipfSampler::probability(std::size_t rank) const {
  return rank == 0 ? cumulative_[0] : cumulative_[rank] - cumulative_[rank - 1];
}

double TierCounts::hit_rate() const noexcept {
  return total() == 0 ? 0.0 : static_cast<double>(primary + secondary) / static_cast<double>(total());
}

double nearest_rank_percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

nlohmann::json to_json(const LatencyReport& r) {
  const auto tiers = [](const TierCounts& t) {
    return nlohmann::json{
        {"primary", t.primary}, {"secondary", t.secondary}, {"miss", t.miss}, {"hit_rate", t.hit_rate()}};
  };
  return {{"concurrency", r.concurrency},   {"duration_s", r.duration_s}, {"targets", r.targets},
          {"what_if_fraction", r.what_if_fraction},
          {"requests", r.requests},         {"errors", r.errors},         {"p50_ms", r.p50_ms},
          {"p95_ms", r.p95_ms},             {"p99_ms", r.p99_ms},         {"mean_ms", r.mean_ms},
          {"max_ms", r.max_ms},             {"throughput_rps", r.throughput_rps},
          {"client_tiers", tiers(r.client_tiers)}, {"server_tiers", tiers(r.server_tiers)}};
}

LatencyReport run_load_test(const LoadProfile& profile) {
  if (profile.concurrency == 0 || !(profile.duration_s > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "concurrency and duration must be positive");
  }
  httplib::Client control(profile.url);
  control.set_connection_timeout(5);
  const auto spots = get_json(control, "/hotspots?min_lat=-90&min_lon=-180&max_lat=90&max_lon=180&k=" +
                                           std::to_string(profile.max_targets));
  if (!(profile.what_if_fraction >= 0.0 && profile.what_if_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "what_if_fraction must lie in [0, 1]");
  }
  std::vector<std::string> bodies, what_if_bodies;
  for (const auto& h : spots.at("hotspots")) {
    const auto& c = h.at("center");
    nlohmann::json request{{"location", {{"lat", c.at("lat")}, {"lon", c.at("lon")}}}};
    bodies.push_back(request.dump());
    request["weather_override"] = {{"category", 4}};
    what_if_bodies.push_back(request.dump());
  }
  if (bodies.empty()) throw Error(ErrorCode::kInsufficientData, "service reports no active cells");
  // Popularity is independent of the risk ranking /hotspots returns.
  std::mt19937_64 shuffle_rng(profile.seed);
  std::vector<std::size_t> order(bodies.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  const ZipfSampler zipf(bodies.size(), profile.zipf);

  const TierCounts before = server_counts(control);
  std::mutex merge_mutex;
  std::vector<double> latencies;
  TierCounts client;
  std::atomic<std::uint64_t> errors{0};
  const auto start = std::chrono::steady_clock::now();
  const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(profile.duration_s));
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < profile.concurrency; ++w) {
    workers.emplace_back([&, w] {
      httplib::Client http(profile.url);
      http.set_keep_alive(true);
      http.set_tcp_nodelay(true);
      http.set_connection_timeout(10);
      http.set_read_timeout(30);
      std::mt19937_64 rng(profile.seed * 1000003u + w + 1);
      std::vector<double> local;
      TierCounts tiers;
      std::uint64_t failed = 0;
      std::bernoulli_distribution what_if(profile.what_if_fraction);
      while (std::chrono::steady_clock::now() < deadline) {
        const std::size_t target = order[zipf(rng)];
        const auto& body = what_if(rng) ? what_if_bodies[target] : bodies[target];
        const auto t0 = std::chrono::steady_clock::now();
        const auto res = http.Post("/predict", body, "application/json");
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (!res || res->status != 200) {
          ++failed;
          continue;
        }
        local.push_back(ms);
        if (res->body.find(R"("cache_tier":"PRIMARY")") != std::string::npos) {
          ++tiers.primary;
        } else if (res->body.find(R"("cache_tier":"SECONDARY")") != std::string::npos) {
          ++tiers.secondary;
        } else {
          ++tiers.miss;
        }
      }
      errors += failed;
      std::lock_guard lock(merge_mutex);
      latencies.insert(latencies.end(), local.begin(), local.end());
      client.primary += tiers.primary;
      client.secondary += tiers.secondary;
      client.miss += tiers.miss;
    });
  }
  for (auto& t : workers) t.join();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const TierCounts after = server_counts(control);

  LatencyReport report;
  report.concurrency = profile.concurrency;
  report.what_if_fraction = profile.what_if_fraction;
  report.duration_s = elapsed;
  report.targets = bodies.size();
  report.requests = latencies.size();
  report.errors = errors.load();
  if (report.requests == 0 && report.errors > 0) {
    throw Error(ErrorCode::kServiceUnreachable, "every request failed");
  }
  report.p50_ms = nearest_rank_percentile(latencies, 0.50);
  report.p95_ms = nearest_rank_percentile(latencies, 0.95);
  report.p99_ms = nearest_rank_percentile(latencies, 0.99);
  for (double v : latencies) {
    report.mean_ms += v;
    report.max_ms = std::max(report.max_ms, v);
  }
  if (!latencies.empty()) report.mean_ms /= static_cast<double>(latencies.size());
  report.throughput_rps = static_cast<double>(report.requests) / elapsed;
  report.client_tiers = client;
  report.server_tiers = {after.primary - before.primary, after.secondary - before.secondary, after.miss - before.miss};
  return report;
}

}  // namespace crashcast::service
