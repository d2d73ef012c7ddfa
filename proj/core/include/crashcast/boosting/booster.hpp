#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/boosting/tree.hpp"
#include "crashcast/matrix.hpp"

namespace crashcast::boosting {

enum class BoosterVariant { kDepthwise, kLeafwise };
std::string_view variant_name(BoosterVariant v) noexcept;
BoosterVariant parse_variant(std::string_view name);  // throws kInvalidArgument

// Severity-weighted gradient-based one-side sampling. The leaf-wise variant
// uses it in place of row bagging when enabled.
struct GossConfig {
  bool enabled = false;
  double a_top = 0.2;
  double b_rest = 0.1;
  double severity_weight_exponent = 0.5;

  // a_top in (0, 1], b_rest >= 0, a_top + b_rest <= 1; b_rest may be 0 only
  // with a_top = 1.
  void validate() const;
  friend bool operator==(const GossConfig&, const GossConfig&) = default;
};

struct BoosterConfig {
  BoosterVariant variant = BoosterVariant::kDepthwise;
  std::size_t n_estimators = 100;
  int max_depth = 3;  // <= 0 means unbounded (leaf-wise only)
  std::size_t num_leaves = 31;
  double min_child_weight = 1.0;      // hessian-sum floor per child
  std::size_t min_child_samples = 1;  // raw row-count floor per child
  double learning_rate = 0.1;
  double subsample = 1.0;
  double colsample_bytree = 1.0;
  double reg_alpha = 0.0;
  double reg_lambda = 1.0;
  double gamma = 0.0;
  std::size_t max_bins = 255;
  std::uint64_t seed = 0;
  GossConfig goss;

  // learning_rate in [0, 1], subsample and colsample in (0, 1], regularizers
  // nonnegative, 2 <= max_bins <= 255. Throws kInvalidArgument.
  void validate() const;
  friend bool operator==(const BoosterConfig&, const BoosterConfig&) = default;
};

// Tuned parameter sets of the two boosters. The leaf-wise one lists its
// boosting type as "gbd", read here as plain gbdt.
BoosterConfig depthwise_preset();
BoosterConfig leafwise_preset();

nlohmann::json to_json(const BoosterConfig& config);
BoosterConfig booster_config_from_json(const nlohmann::json& doc);

// Row-major n x k gradients and hessians of the multiclass log-loss:
// g = p - 1{y = c}, h = p (1 - p), p = softmax(margin row).
struct GradientPair {
  std::vector<double> g;
  std::vector<double> h;
};
GradientPair softmax_gradients(std::span<const int> labels, std::span<const double> margins, std::size_t num_classes);

struct GossSample {
  std::vector<std::size_t> indices;  // ascending
  std::vector<double> weights;       // parallel to indices
};

// Ranks rows by |g_i| * (N / N_c(i))^gamma_s, keeps the top ceil(a n) with
// weight 1 and draws ceil(b n) of the rest uniformly with weight (1 - a) / b.
// Ties in score go to the lower index. Throws kEmptyInput, kLengthMismatch.
GossSample goss_sample(std::span<const double> gradient_magnitudes, std::span<const int> severities,
                       const GossConfig& goss, std::uint64_t seed);

// Quantile bin edges per feature. Bin 0 holds missing values; a finite value v
// lands in bin 1 + (index of the first edge >= v).
class FeatureBinner {
 public:
  static FeatureBinner fit(const Matrix& x, std::size_t max_bins);
  std::size_t num_features() const noexcept { return edges_.size(); }
  const std::vector<double>& edges(std::size_t feature) const { return edges_[feature]; }
  std::size_t bin_count(std::size_t feature) const { return edges_[feature].size() + 2; }
  std::uint8_t bin(std::size_t feature, double v) const;
  std::vector<std::uint8_t> transform(const Matrix& x) const;  // row-major

 private:
  std::vector<std::vector<double>> edges_;
};

struct FitTrace {
  std::vector<double> train_logloss;  // entry 0 is the base score, then one per round
};

class Booster {
 public:
  // Dispatches on config.variant; the leaf-wise variant honours config.goss.
  // Labels are 0..K-1 with K = max label + 1. Throws kSingleClassInput,
  // kLengthMismatch, kEmptyMatrix, kInvalidArgument.
  static Booster fit(const Matrix& x, std::span<const int> labels, const BoosterConfig& config,
                     FitTrace* trace = nullptr);

  bool fitted() const noexcept { return num_classes_ > 0; }
  const BoosterConfig& config() const noexcept { return config_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t num_features() const noexcept { return num_features_; }
  const std::vector<double>& base_score() const noexcept { return base_score_; }
  // trees()[c] holds the trees of class c in round order.
  const std::vector<std::vector<DecisionTree>>& trees() const noexcept { return trees_; }
  std::size_t node_count() const noexcept;

  // Throws kUnfittedModel, kLengthMismatch.
  void predict_margin(std::span<const double> x, std::span<double> out) const;
  std::vector<double> predict_margin(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const;

  // Path attribution for one class: each split's change in cover-weighted
  // expectation goes to its feature. base + sum(contributions) = margin.
  void attribute(std::span<const double> x, std::size_t cls, double& base, std::span<double> contributions) const;

  // Exact Shapley values of the class margin where absent features take their
  // values from each background row in turn (averaged). base is the mean
  // background margin; base + sum(contributions) = margin. Contributions are
  // added to `contributions`.
  void attribute_interventional(std::span<const double> x, std::size_t cls, const Matrix& background, double& base,
                                std::span<double> contributions) const;

  friend nlohmann::json to_json(const Booster& b);
  friend Booster booster_from_json(const nlohmann::json& doc);

 private:
  BoosterConfig config_;
  std::size_t num_classes_ = 0;
  std::size_t num_features_ = 0;
  std::vector<double> base_score_;
  std::vector<std::vector<DecisionTree>> trees_;
};

nlohmann::json to_json(const Booster& b);
Booster booster_from_json(const nlohmann::json& doc);  // throws kMalformedDocument

Booster fit_depthwise(const Matrix& x, std::span<const int> labels, BoosterConfig config, FitTrace* trace = nullptr);
Booster fit_leafwise_goss(const Matrix& x, std::span<const int> labels, BoosterConfig config, const GossConfig& goss,
                          FitTrace* trace = nullptr);

// In-place numerically stable softmax.
void softmax(std::span<double> v);

// Mean multiclass log-loss of probability rows (row-major n x k).
double multiclass_logloss(std::span<const int> labels, std::span<const double> probabilities, std::size_t k);

}  // namespace crashcast::boosting
