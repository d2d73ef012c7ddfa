#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/boosting/booster.hpp"
#include "crashcast/record.hpp"
#include "crashcast/time.hpp"

namespace crashcast::boosting {

// Conditions under which booster performance is tracked.
struct ContextBucket {
  static constexpr std::size_t kCount = 72;

  int weather_category = 1;  // WEATHER1 code 1..6
  int hour_bin = 0;          // 4-hour bins 0..5
  bool weekend = false;

  std::size_t index() const;  // throws kInvalidArgument when out of range
  static ContextBucket from_index(std::size_t index);
  friend auto operator<=>(const ContextBucket&, const ContextBucket&) = default;
};

ContextBucket context_at(Timestamp t, int weather_category);
// Missing weather reads as category 1; missing time as a weekday midnight,
// with HOUR_OF_DAY used when present.
ContextBucket context_of(const CrashRecord& record);

struct MetaOptions {
  double decay = 0.995;
  std::size_t min_bucket_count = 50;
};

// Exponentially decayed accuracy a_m per booster, weights a_m^2 / sum a^2.
struct PerformanceProfile {
  std::vector<double> decayed_correct;
  double decayed_total = 0.0;
  std::size_t count = 0;

  std::vector<double> weights() const;  // uniform while nothing is known
};

class MetaWeights {
 public:
  MetaWeights() = default;
  MetaWeights(std::size_t num_models, MetaOptions options);

  std::size_t num_models() const noexcept { return num_models_; }
  const MetaOptions& options() const noexcept { return options_; }

  // Records whether each booster classified one validation sample correctly.
  void update(const ContextBucket& context, const std::vector<bool>& correct);

  // Bucket weights, or the global ones when the bucket saw fewer than
  // min_bucket_count samples.
  std::vector<double> weights_for(const ContextBucket& context) const;
  std::vector<double> global_weights() const { return global_.weights(); }
  const std::map<std::size_t, PerformanceProfile>& buckets() const noexcept { return buckets_; }
  const PerformanceProfile& global_profile() const noexcept { return global_; }

  friend nlohmann::json to_json(const MetaWeights& m);
  friend MetaWeights meta_weights_from_json(const nlohmann::json& doc);

 private:
  void bump(PerformanceProfile& p, const std::vector<bool>& correct) const;

  std::size_t num_models_ = 0;
  MetaOptions options_;
  std::map<std::size_t, PerformanceProfile> buckets_;
  PerformanceProfile global_;
};

nlohmann::json to_json(const MetaWeights& m);
MetaWeights meta_weights_from_json(const nlohmann::json& doc);

// Streams the validation rows in order through MetaWeights::update using each
// booster's argmax prediction.
MetaWeights fit_meta_weights(const std::vector<const Booster*>& boosters, const Matrix& x, std::span<const int> labels,
                             std::span<const ContextBucket> contexts, const MetaOptions& options = {});

struct EnsemblePrediction {
  std::vector<double> probabilities;
  double confidence = 0.0;  // largest class probability
  int predicted_class = 0;
  std::vector<double> weights;  // per booster, as used
};

enum class AttributionMethod {
  kInterventional,  // exact Shapley against the stored background rows
  kPath,            // cover-weighted path attribution, no background needed
};
std::string_view attribution_method_name(AttributionMethod m) noexcept;

struct AttributionResult {
  AttributionMethod method = AttributionMethod::kInterventional;
  int explained_class = 0;
  double base_value = 0.0;
  double margin = 0.0;
  std::vector<double> contributions;      // per feature
  std::map<std::string, double> grouped;  // factor group -> summed contribution
};

class EnsembleModel {
 public:
  static constexpr int kVersion = 1;

  EnsembleModel() = default;
  // Throws kInvalidArgument when boosters disagree on classes or features or
  // the background has the wrong width.
  EnsembleModel(std::vector<std::string> feature_names, std::vector<Booster> boosters, MetaWeights meta,
                Matrix background = {});

  bool fitted() const noexcept { return !boosters_.empty(); }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const std::vector<Booster>& boosters() const noexcept { return boosters_; }
  const MetaWeights& meta() const noexcept { return meta_; }
  // Reference rows for interventional attribution (a training sample).
  const Matrix& background() const noexcept { return background_; }
  std::size_t num_classes() const noexcept { return fitted() ? boosters_.front().num_classes() : 0; }
  std::size_t node_count() const noexcept;

  // p = sum_m w_m(context) p_m, renormalized. Throws kUnfittedModel,
  // kLengthMismatch.
  EnsemblePrediction predict(std::span<const double> x, const ContextBucket& context) const;

  // Weight-averaged booster margins; the quantity attribution explains.
  std::vector<double> margin(std::span<const double> x, const ContextBucket& context) const;

 private:
  std::vector<std::string> feature_names_;
  std::vector<Booster> boosters_;
  MetaWeights meta_;
  Matrix background_;
};

nlohmann::json to_json(const EnsembleModel& m);
EnsembleModel ensemble_from_json(const nlohmann::json& doc);  // throws kMalformedDocument

// Per-booster attributions of the class margin combined by ensemble weight:
// base_value + sum(contributions) = margin(x)[cls]. The interventional method
// falls back to the path method when the model carries no background. Features
// are grouped by name into the five factor groups; unknown names are left out
// of `grouped`. Throws kUnfittedModel, kLengthMismatch.
AttributionResult attribute_prediction(const EnsembleModel& model, std::span<const double> x, int cls,
                                       const ContextBucket& context,
                                       AttributionMethod method = AttributionMethod::kInterventional);

}  // namespace crashcast::boosting
