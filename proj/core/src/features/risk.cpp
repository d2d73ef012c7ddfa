#include "crashcast/features/risk.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "crashcast/error.hpp"

namespace crashcast::features {

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

double flag01(const CrashRecord& r, Flag f) { return r.flag(f).value_or(false) ? 1.0 : 0.0; }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void check_component(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::kComponentOutOfRange, std::string(name) + " must lie in [0,1]");
  }
}

}  // namespace

double weighted_risk(std::span<const double> flags, std::span<const double> weights) {
  if (flags.size() != weights.size()) throw Error(ErrorCode::kLengthMismatch, "flags and weights differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < flags.size(); ++i) s += flags[i] * weights[i];
  return clip01(s);
}

double impairment_risk(const CrashRecord& r, const BehavioralRiskWeights& w) {
  const std::array<double, 3> f{flag01(r, Flag::kAlcoholRelated), flag01(r, Flag::kDruggedDriver),
                                flag01(r, Flag::kMarijuanaRelated)};
  return weighted_risk(f, w.impairment);
}

double distraction_risk(const CrashRecord& r, const BehavioralRiskWeights& w) {
  const std::array<double, 3> f{flag01(r, Flag::kCellPhone), flag01(r, Flag::kDistracted),
                                flag01(r, Flag::kFatigueAsleep)};
  return weighted_risk(f, w.distraction);
}

double weather_risk(std::optional<int> weather1, const EnvironmentalRiskWeights& w) {
  if (!weather1) return w.weather_default;
  auto it = w.weather_map.find(*weather1);
  return it == w.weather_map.end() ? w.weather_default : it->second;
}

EnvironmentalFeatures environmental_features(const CrashRecord& r, const EnvironmentalRiskWeights& w) {
  EnvironmentalFeatures e;
  const std::array<double, 3> road{flag01(r, Flag::kIcyRoad), flag01(r, Flag::kWetRoad),
                                   flag01(r, Flag::kSnowSlushRoad)};
  e.adverse_road = weighted_risk(road, w.road_component);
  e.weather_risk = weather_risk(r.code(CodeField::kWeather1), w);
  e.total = clip01(e.weather_risk * w.compound[0] + e.adverse_road * w.compound[1]);
  return e;
}

double visibility_factor(double visibility_km) { return clip01(1.0 - visibility_km / 10.0); }

double environmental_risk_E(double weather, double road, double visibility, const EnvironmentalRiskWeights& w) {
  check_component(weather, "W");
  check_component(road, "R");
  check_component(visibility, "V");
  return w.alpha * weather + w.beta * road + w.gamma * visibility;
}

double environmental_risk_E(const WeatherSnapshot& weather, double road, double visibility,
                            const EnvironmentalRiskWeights& w) {
  return environmental_risk_E(weather_risk(weather.category, w), road, visibility, w);
}

EnvironmentalRiskWeights fit_environmental_weights(std::span<const std::array<double, 3>> components,
                                                   std::span<const int> outcome,
                                                   const EnvironmentalRiskWeights& base) {
  if (components.size() != outcome.size()) throw Error(ErrorCode::kLengthMismatch, "components and outcomes differ");
  const std::size_t n = components.size();
  if (n == 0) throw Error(ErrorCode::kDegenerateDesign, "empty design");
  const bool varying_outcome =
      std::any_of(outcome.begin(), outcome.end(), [&](int y) { return (y != 0) != (outcome[0] != 0); });
  if (!varying_outcome) throw Error(ErrorCode::kDegenerateDesign, "outcome is constant");
  for (std::size_t j = 0; j < 3; ++j) {
    const bool varies = std::any_of(components.begin(), components.end(),
                                    [&](const auto& c) { return c[j] != components[0][j]; });
    if (!varies) throw Error(ErrorCode::kDegenerateDesign, "component column " + std::to_string(j) + " is constant");
  }

  constexpr double kRidge = 1e-4;
  Eigen::Vector4d beta = Eigen::Vector4d::Zero();
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::Vector4d grad = Eigen::Vector4d::Zero();
    Eigen::Matrix4d hess = Eigen::Matrix4d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector4d x(1.0, components[i][0], components[i][1], components[i][2]);
      const double p = 1.0 / (1.0 + std::exp(-x.dot(beta)));
      grad += (p - (outcome[i] != 0 ? 1.0 : 0.0)) * x;
      hess += std::max(p * (1.0 - p), 1e-12) * x * x.transpose();
    }
    for (int j = 1; j < 4; ++j) {
      grad[j] += kRidge * static_cast<double>(n) * beta[j];
      hess(j, j) += kRidge * static_cast<double>(n);
    }
    const Eigen::Vector4d step = hess.ldlt().solve(grad);
    beta -= step;
    if (step.norm() < 1e-10) break;
  }

  EnvironmentalRiskWeights w = base;
  const double a = std::max(0.0, beta[1]), b = std::max(0.0, beta[2]), g = std::max(0.0, beta[3]);
  const double s = a + b + g;
  if (s > 0.0) {
    w.alpha = a / s;
    w.beta = b / s;
    w.gamma = g / s;
  } else {
    w.alpha = w.beta = w.gamma = 1.0 / 3.0;
  }
  return w;
}

EnvironmentalRiskWeights fit_environmental_weights(std::span<const CrashRecord> history,
                                                   const EnvironmentalRiskWeights& base) {
  std::vector<std::array<double, 3>> x;
  std::vector<int> y;
  for (const auto& r : history) {
    if (!r.severity) continue;
    x.push_back(environmental_components(r, record_weather(r), base));
    y.push_back(severity_index(*r.severity) >= 2 ? 1 : 0);
  }
  if (x.size() < 500) throw Error(ErrorCode::kInsufficientData, "need at least 500 labelled records");
  return fit_environmental_weights(x, y, base);
}

std::array<double, 3> environmental_components(const CrashRecord& r, const WeatherSnapshot& weather,
                                               const EnvironmentalRiskWeights& w) {
  const auto env = environmental_features(r, w);
  return {env.weather_risk, env.adverse_road, visibility_factor(weather.visibility_km)};
}

WeatherSnapshot record_weather(const CrashRecord& r) {
  WeatherSnapshot w = nominal_weather(r.code(CodeField::kWeather1).value_or(1));
  std::mt19937_64 rng(fnv1a(r.id));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  w.temperature_c += 3.0 * u(rng);
  w.precipitation_mm_hr *= 1.0 + 0.2 * u(rng);
  w.visibility_km *= 1.0 + 0.2 * u(rng);
  w.wind_kmh = std::max(0.0, w.wind_kmh + 4.0 * u(rng));
  if (r.occurred_at) w.observed_at = *r.occurred_at;
  return w;
}

std::pair<double, double> cyclical_encode(double value, double period) {
  if (!(period > 0.0)) throw Error(ErrorCode::kInvalidArgument, "period must be positive");
  const double angle = 2.0 * std::numbers::pi * value / period;
  return {std::sin(angle), std::cos(angle)};
}

}  // namespace crashcast::features
