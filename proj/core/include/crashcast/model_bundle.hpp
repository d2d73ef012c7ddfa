#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/boosting/ensemble.hpp"
#include "crashcast/features/feature_vector.hpp"
#include "crashcast/resampling/resampling.hpp"

namespace crashcast {

// Validation accuracy at training time; the reference level for drift checks.
struct DriftBaseline {
  double accuracy = 0.0;
  std::size_t samples = 0;
};

// Everything serving needs: the fitted feature context and the ensemble.
struct ModelBundle {
  static constexpr int kVersion = 1;

  features::FeatureContext context;
  boosting::EnsembleModel ensemble;
  DriftBaseline baseline;

  features::FeatureVector features_for(const CrashRecord& record,
                                       const std::optional<WeatherSnapshot>& weather = std::nullopt) const;
  boosting::ContextBucket context_for(const CrashRecord& record,
                                      const std::optional<WeatherSnapshot>& weather = std::nullopt) const;
  boosting::EnsemblePrediction predict(const CrashRecord& record,
                                       const std::optional<WeatherSnapshot>& weather = std::nullopt) const;
};

nlohmann::json to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const nlohmann::json& doc);  // throws kMalformedDocument
void save_bundle(const std::string& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::string& path);  // throws kUnreadableFile, kMalformedDocument

struct TrainOptions {
  boosting::BoosterConfig depthwise = boosting::depthwise_preset();
  boosting::BoosterConfig leafwise = boosting::leafwise_preset();
  features::FeatureFitOptions features;
  boosting::MetaOptions meta;
  double validation_fraction = 0.2;
  std::size_t background_rows = 64;  // training rows kept for attribution
  std::uint64_t seed = 42;
  // Optional class balancing of the training split only.
  std::optional<resampling::ClassTargets> under;
  std::optional<resampling::ClassTargets> over;
};

struct TrainReport {
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::vector<double> booster_validation_accuracy;
  double ensemble_validation_accuracy = 0.0;
  double fit_seconds = 0.0;
  std::optional<resampling::ResampleReport> resample;
};

nlohmann::json to_json(const TrainReport& report);

// Seeded split of the labelled records, feature context fitted on the training
// split, both boosters trained, meta weights fitted on the validation split in
// input order. Throws kInsufficientData with fewer than 20 labelled records.
ModelBundle train_bundle(std::span<const CrashRecord> records, const TrainOptions& options,
                         TrainReport* report = nullptr);

// Options that retrain the bundle's boosters with their stored configurations.
TrainOptions train_options_from(const ModelBundle& bundle);

// Seeded shuffle split; returns (train indices, validation indices), each ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double validation_fraction,
                                                                            std::uint64_t seed);

}  // namespace crashcast
