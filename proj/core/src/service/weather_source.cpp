#include "crashcast/service/weather_source.hpp"

#include <algorithm>
#include <fstream>

#include "crashcast/error.hpp"
#include "crashcast/record_csv.hpp"

namespace crashcast::service {

namespace {

constexpr std::array<std::string_view, 6> kColumns = {"observed_at",         "weather1",      "temperature_c",
                                                      "precipitation_mm_hr", "visibility_km", "wind_kmh"};

double number(const std::string& text, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "weather fixture line " + std::to_string(line) + ": bad number '" + text + "'");
  }
}

}  // namespace

Timestamp SystemClock::now() const {
  return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

FixtureWeatherSource::FixtureWeatherSource(std::vector<WeatherSnapshot> timeline, std::chrono::seconds retention)
    : timeline_(std::move(timeline)), retention_(retention) {
  for (const auto& w : timeline_) w.validate();
  std::stable_sort(timeline_.begin(), timeline_.end(),
                   [](const auto& a, const auto& b) { return a.observed_at < b.observed_at; });
}

FixtureWeatherSource FixtureWeatherSource::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot open weather fixture " + path);
  return parse(in);
}

FixtureWeatherSource FixtureWeatherSource::parse(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kMissingHeader, "empty weather fixture");
  const auto header = split_csv_line(line);
  std::array<std::size_t, kColumns.size()> pos{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    const auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) throw Error(ErrorCode::kMissingHeader, "weather fixture lacks column " + std::string(kColumns[c]));
    pos[c] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<WeatherSnapshot> timeline;
  std::size_t number_of_line = 1;
  while (std::getline(in, line)) {
    ++number_of_line;
    if (line.empty() || line == "\r") continue;
    if (line.back() == '\r') line.pop_back();
    const auto f = split_csv_line(line);
    if (f.size() < header.size()) {
      throw Error(ErrorCode::kInvalidArgument, "weather fixture line " + std::to_string(number_of_line) + ": too few fields");
    }
    WeatherSnapshot w;
    const auto t = parse_iso8601(f[pos[0]]);
    if (!t) throw Error(ErrorCode::kInvalidArgument, "weather fixture line " + std::to_string(number_of_line) + ": bad time");
    w.observed_at = *t;
    w.category = static_cast<int>(number(f[pos[1]], number_of_line));
    w.temperature_c = number(f[pos[2]], number_of_line);
    w.precipitation_mm_hr = number(f[pos[3]], number_of_line);
    w.visibility_km = number(f[pos[4]], number_of_line);
    w.wind_kmh = number(f[pos[5]], number_of_line);
    try {
      w.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidArgument, "weather fixture line " + std::to_string(number_of_line) + ": " + e.what());
    }
    timeline.push_back(w);
  }
  return FixtureWeatherSource(std::move(timeline));
}

WeatherSnapshot FixtureWeatherSource::current(const GeoPoint&, Timestamp at) const {
  const auto it = std::upper_bound(timeline_.begin(), timeline_.end(), at,
                                   [](Timestamp t, const WeatherSnapshot& w) { return t < w.observed_at; });
  if (it == timeline_.begin() || at - std::prev(it)->observed_at > retention_) {
    throw Error(ErrorCode::kWeatherSourceUnavailable, "no observation within the retention window of " + format_iso8601(at));
  }
  return *std::prev(it);
}

void write_weather_fixture(std::ostream& out, std::span<const WeatherSnapshot> timeline) {
  for (std::size_t c = 0; c < kColumns.size(); ++c) out << (c ? "," : "") << kColumns[c];
  out << '\n';
  for (const auto& w : timeline) {
    out << format_iso8601(w.observed_at) << ',' << w.category << ',' << format_double(w.temperature_c) << ','
        << format_double(w.precipitation_mm_hr) << ',' << format_double(w.visibility_km) << ','
        << format_double(w.wind_kmh) << '\n';
  }
}

}  // namespace crashcast::service
