#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/matrix.hpp"
#include "crashcast/model_bundle.hpp"
#include "crashcast/record.hpp"

namespace crashcast::evaluation {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = kSeverityCount) : k_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return k_; }
  std::size_t operator()(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted, std::size_t n = 1) { counts_[truth * k_ + predicted] += n; }
  std::size_t total() const noexcept;
  std::size_t row_sum(std::size_t truth) const;
  std::size_t col_sum(std::size_t predicted) const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::size_t> counts_;
};

nlohmann::json to_json(const ConfusionMatrix& cm);

// Throws kLengthMismatch, and kInvalidArgument for labels outside [0, classes).
ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t classes = kSeverityCount);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;  // mean of per-class F1
  std::vector<ClassMetrics> per_class;
};

// 0/0 counts as 0 for precision, recall and F1; macro averages run over every
// class of the matrix. Throws kEmptyMatrix when the matrix has no samples.
Metrics classification_metrics(const ConfusionMatrix& cm);

// One-vs-rest AUC from average ranks (ties share credit), macro-averaged over
// classes that occur in `labels`. scores is n x K. Throws kSingleClassInput
// when fewer than two classes occur, kLengthMismatch, kInvalidArgument for
// non-finite scores.
double roc_auc_ovr(const Matrix& scores, std::span<const int> labels);

enum class FoldMode { kRandom, kGeographic };

struct FoldSpec {
  std::size_t k = 5;
  FoldMode mode = FoldMode::kRandom;
  int geographic_resolution = 8;  // 0.70 degree cells
};

// Fold id per sample. Random mode deals each class's shuffled members round
// robin, continuing the deal across classes. Geographic mode places whole
// cells, largest first, into the currently smallest fold; samples without a
// location share one pseudo-cell. Throws kInsufficientData when a fold would be
// empty, kInvalidArgument for k < 2.
std::vector<std::size_t> assign_folds(std::span<const int> labels, std::span<const std::optional<GeoPoint>> locations,
                                      const FoldSpec& spec, std::uint64_t seed);

// Trains on `train` rows and returns class probabilities (rows x K) for
// `test` rows, in order.
using FoldModel = std::function<Matrix(const std::vector<std::size_t>& train, const std::vector<std::size_t>& test)>;

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over folds
};
Summary summarize(const std::vector<double>& values);

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  ConfusionMatrix confusion;
  Metrics metrics;
  std::optional<double> roc_auc;  // absent when the fold holds a single class
};

struct CvReport {
  FoldMode mode = FoldMode::kRandom;
  std::vector<FoldResult> folds;
  ConfusionMatrix pooled;
  Summary accuracy, macro_precision, macro_recall, macro_f1, roc_auc;
};

nlohmann::json to_json(const CvReport& report);

CvReport kfold_cv(std::span<const int> labels, std::span<const std::optional<GeoPoint>> locations, const FoldSpec& spec,
                  const FoldModel& model, std::uint64_t seed, std::size_t classes = kSeverityCount);

// k-fold CV of the whole training pipeline on labelled records: each fold
// trains a bundle on the other folds and scores its own records.
CvReport cross_validate_records(std::span<const CrashRecord> records, const FoldSpec& spec,
                                const TrainOptions& options, std::uint64_t seed);

struct DriftSnapshot {
  std::size_t window_size = 0;
  std::size_t capacity = 0;
  double window_accuracy = 0.0;
  double baseline_accuracy = 0.0;
  double baseline_sigma = 0.0;
  bool alert = false;
  std::size_t updates = 0;
};

nlohmann::json to_json(const DriftSnapshot& s);

// Sliding window of the last W outcomes. alert holds while the window is full
// and its accuracy is below baseline - 3 sigma. Without an explicit sigma the
// binomial standard error sqrt(p (1 - p) / W) is used.
class DriftMonitor {
 public:
  explicit DriftMonitor(double baseline_accuracy, std::optional<double> baseline_sigma = std::nullopt,
                        std::size_t window = 1000, double threshold_sigmas = 3.0);

  bool update(int prediction, int outcome);
  bool alert() const noexcept { return alert_; }
  double window_accuracy() const noexcept;
  std::size_t size() const noexcept { return count_; }
  double baseline_sigma() const noexcept { return sigma_; }
  DriftSnapshot snapshot() const;

 private:
  std::vector<std::uint8_t> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::size_t correct_ = 0;
  std::size_t updates_ = 0;
  double baseline_;
  double sigma_;
  double threshold_sigmas_;
  bool alert_ = false;
};

}  // namespace crashcast::evaluation
