#pragma once

#include <array>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "crashcast/record.hpp"

namespace crashcast::features {

struct BehavioralRiskWeights {
  std::array<double, 3> impairment{0.4, 0.4, 0.2};   // alcohol, drugged, marijuana
  std::array<double, 3> distraction{0.3, 0.4, 0.3};  // cell phone, distracted, fatigue
};

struct EnvironmentalRiskWeights {
  double alpha = 1.0 / 3.0;  // weather W(t)
  double beta = 1.0 / 3.0;   // road R(l,t)
  double gamma = 1.0 / 3.0;  // visibility V(l,t)
  std::array<double, 3> road_component{0.4, 0.3, 0.3};  // icy, wet, snow/slush
  std::map<int, double> weather_map{{1, 0.2}, {2, 0.4}, {3, 0.6}, {4, 0.8}, {5, 0.9}, {6, 0.7}};
  double weather_default = 0.2;
  std::array<double, 2> compound{0.6, 0.4};  // weather, road
};

// Clipped dot product. Throws kLengthMismatch.
double weighted_risk(std::span<const double> flags, std::span<const double> weights);

// Missing flags count as 0.
double impairment_risk(const CrashRecord& r, const BehavioralRiskWeights& w = {});
double distraction_risk(const CrashRecord& r, const BehavioralRiskWeights& w = {});

double weather_risk(std::optional<int> weather1, const EnvironmentalRiskWeights& w = {});

struct EnvironmentalFeatures {
  double adverse_road = 0.0;
  double weather_risk = 0.0;
  double total = 0.0;
};

EnvironmentalFeatures environmental_features(const CrashRecord& r, const EnvironmentalRiskWeights& w = {});

// V = clamp(1 - visibility_km / 10, 0, 1).
double visibility_factor(double visibility_km);

// alpha*W + beta*R + gamma*V. Throws kComponentOutOfRange when a component is
// outside [0, 1].
double environmental_risk_E(double weather, double road, double visibility, const EnvironmentalRiskWeights& w);
double environmental_risk_E(const WeatherSnapshot& weather, double road, double visibility_factor,
                            const EnvironmentalRiskWeights& w);

// Logistic regression of the outcome on (W, R, V) with a small ridge penalty;
// coefficients are projected to be nonnegative and normalized to sum to one
// (uniform thirds if all project to zero). Throws kDegenerateDesign when the
// outcome or any column is constant.
EnvironmentalRiskWeights fit_environmental_weights(std::span<const std::array<double, 3>> components,
                                                   std::span<const int> outcome,
                                                   const EnvironmentalRiskWeights& base = {});

// Record-level fit: outcome is 1{severity >= Serious}. Needs at least 500
// labelled records (kInsufficientData).
EnvironmentalRiskWeights fit_environmental_weights(std::span<const CrashRecord> history,
                                                   const EnvironmentalRiskWeights& base = {});

// (W, R, V) for a record using its deterministic weather snapshot.
std::array<double, 3> environmental_components(const CrashRecord& r, const WeatherSnapshot& weather,
                                               const EnvironmentalRiskWeights& w = {});

// Deterministic per-record weather: the nominal snapshot of the record's
// WEATHER1 category (Clear when missing) jittered by a hash of the record id.
WeatherSnapshot record_weather(const CrashRecord& r);

// (sin(2*pi*v/p), cos(2*pi*v/p)). Throws kInvalidArgument for p <= 0.
std::pair<double, double> cyclical_encode(double value, double period);

}  // namespace crashcast::features
