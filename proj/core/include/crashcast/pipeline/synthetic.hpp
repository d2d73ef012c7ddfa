#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "crashcast/cell_index.hpp"
#include "crashcast/record.hpp"

namespace crashcast::pipeline {

struct ClusterCenter {
  GeoPoint center;
  double weight = 1.0;
  double spread_deg = 0.08;  // standard deviation of the Gaussian, degrees
};

// Severity counts of the reference dataset: 43,372 / 13,364 / 2,159 / 601.
std::array<double, kSeverityCount> reference_severity_marginals();
std::vector<ClusterCenter> default_cluster_centers();
std::map<std::string, double> default_planted_effects();
std::map<std::string, double> default_flag_base_rates();

struct SyntheticConfig {
  std::size_t n_records = 10000;
  std::array<double, kSeverityCount> severity_marginals = reference_severity_marginals();
  std::set<int> seasonal_peak_months{12, 1, 2};
  double seasonal_boost = 1.5;
  std::set<int> rush_hours{7, 8, 16, 17};
  double rush_boost = 2.0;
  std::vector<ClusterCenter> cluster_centers = default_cluster_centers();
  double background_weight = 0.25;  // share of records drawn uniformly over the region
  BoundingBox region{39.5, -80.6, 42.5, -74.6};
  int county_rows = 6;
  int county_cols = 11;
  std::uint64_t seed = 42;
  int year = 2023;
  // Flag name -> log-odds shift of the flag per severity level. By symmetry of
  // the odds ratio this is also the log-odds shift of the next severity level
  // given the flag.
  std::map<std::string, double> planted_effects = default_planted_effects();
  std::map<std::string, double> flag_base_rates = default_flag_base_rates();
  double weather_effect = 0.35;  // log-odds per severity level for adverse WEATHER1
  double defect_rate = 0.004;    // planted invalid records (missing location, (0,0), missing severity)

  // Throws kInvalidArgument when marginals do not sum to 1 or weights are negative.
  void validate() const;
};

// Severity counts are allocated exactly (largest remainder) from the marginals
// and shuffled; all other fields are drawn conditionally on severity, so the
// marginals are met exactly and planted effects act as log-odds shifts.
// Fully determined by config.seed.
std::vector<CrashRecord> generate_synthetic(const SyntheticConfig& config);

// Number of planted defects a config will produce (for retention checks).
std::size_t planted_defect_count(const std::vector<CrashRecord>& records, const BoundingBox& region);

}  // namespace crashcast::pipeline
