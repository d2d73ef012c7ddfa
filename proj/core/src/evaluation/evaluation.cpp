#include "crashcast/evaluation/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "crashcast/cell_index.hpp"
#include "crashcast/error.hpp"

namespace crashcast::evaluation {

std::size_t ConfusionMatrix::total() const noexcept { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < k_; ++p) s += (*this)(truth, p);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::size_t s = 0;
  for (std::size_t t = 0; t < k_; ++t) s += (*this)(t, predicted);
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw Error(ErrorCode::kLengthMismatch, "confusion matrices differ in size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  auto rows = nlohmann::json::array();
  for (std::size_t t = 0; t < cm.classes(); ++t) {
    auto row = nlohmann::json::array();
    for (std::size_t p = 0; p < cm.classes(); ++p) row.push_back(cm(t, p));
    rows.push_back(std::move(row));
  }
  return rows;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) throw Error(ErrorCode::kLengthMismatch, "truth and predictions differ in length");
  ConfusionMatrix cm(classes);
  const auto k = static_cast<int>(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k) {
      throw Error(ErrorCode::kInvalidArgument, "label outside the class range");
    }
    cm.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

Metrics classification_metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw Error(ErrorCode::kEmptyMatrix, "confusion matrix has no samples");
  Metrics m;
  std::size_t trace = 0;
  const auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    trace += cm(c, c);
    ClassMetrics cls;
    cls.precision = ratio(cm(c, c), cm.col_sum(c));
    cls.recall = ratio(cm(c, c), cm.row_sum(c));
    cls.f1 = cls.precision + cls.recall > 0.0 ? 2.0 * cls.precision * cls.recall / (cls.precision + cls.recall) : 0.0;
    m.macro_precision += cls.precision;
    m.macro_recall += cls.recall;
    m.macro_f1 += cls.f1;
    m.per_class.push_back(cls);
  }
  const auto k = static_cast<double>(cm.classes());
  m.macro_precision /= k;
  m.macro_recall /= k;
  m.macro_f1 /= k;
  m.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return m;
}

double roc_auc_ovr(const Matrix& scores, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (scores.rows() != n) throw Error(ErrorCode::kLengthMismatch, "scores and labels differ in length");
  for (double v : scores.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "scores must be finite");
  }
  std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw Error(ErrorCode::kSingleClassInput, "AUC needs at least two classes");

  std::vector<std::size_t> order(n);
  std::vector<double> rank(n);
  double sum = 0.0;
  for (int c : present) {
    if (c < 0 || static_cast<std::size_t>(c) >= scores.cols()) throw Error(ErrorCode::kInvalidArgument, "label has no score column");
    const auto col = static_cast<std::size_t>(c);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores(a, col) < scores(b, col); });
    // Average 1-based ranks over tied runs.
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && scores(order[j + 1], col) == scores(order[i], col)) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
      i = j + 1;
    }
    double pos_rank = 0.0, pos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == c) {
        pos_rank += rank[i];
        pos += 1.0;
      }
    }
    const double neg = static_cast<double>(n) - pos;
    sum += (pos_rank - pos * (pos + 1.0) / 2.0) / (pos * neg);
  }
  return sum / static_cast<double>(present.size());
}

std::vector<std::size_t> assign_folds(std::span<const int> labels, std::span<const std::optional<GeoPoint>> locations,
                                      const FoldSpec& spec, std::uint64_t seed) {
  if (spec.k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be at least 2");
  const std::size_t n = labels.size();
  if (n < spec.k) throw Error(ErrorCode::kInsufficientData, "fewer samples than folds");
  std::vector<std::size_t> fold(n, 0);
  if (spec.mode == FoldMode::kRandom) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    std::mt19937_64 rng(seed);
    std::size_t next = 0;
    for (auto& [label, members] : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      for (std::size_t i : members) fold[i] = next++ % spec.k;
    }
    return fold;
  }

  if (locations.size() != n) throw Error(ErrorCode::kLengthMismatch, "locations and labels differ in length");
  std::map<std::uint64_t, std::vector<std::size_t>> cells;
  constexpr std::uint64_t kNoLocation = ~std::uint64_t{0};
  for (std::size_t i = 0; i < n; ++i) {
    const auto key = locations[i] ? cell_of(*locations[i], spec.geographic_resolution).key() : kNoLocation;
    cells[key].push_back(i);
  }
  if (cells.size() < spec.k) throw Error(ErrorCode::kInsufficientData, "fewer occupied cells than folds");
  std::vector<std::pair<std::uint64_t, std::size_t>> order;
  for (const auto& [key, members] : cells) order.emplace_back(key, members.size());
  // Largest cells first; equal sizes in a seeded order.
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::size_t> load(spec.k, 0);
  for (const auto& [key, size] : order) {
    const auto target = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    load[target] += size;
    for (std::size_t i : cells[key]) fold[i] = target;
  }
  return fold;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

nlohmann::json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

}  // namespace

nlohmann::json to_json(const CvReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  std::vector<double> acc, prec, rec, f1;
  std::vector<nlohmann::json> auc;
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"train_size", f.train_size},
                     {"test_size", f.test_size},
                     {"accuracy", f.metrics.accuracy},
                     {"macro_precision", f.metrics.macro_precision},
                     {"macro_recall", f.metrics.macro_recall},
                     {"macro_f1", f.metrics.macro_f1},
                     {"roc_auc_ovr", f.roc_auc ? nlohmann::json(*f.roc_auc) : nlohmann::json()},
                     {"confusion_matrix", to_json(f.confusion)}});
    acc.push_back(f.metrics.accuracy);
    prec.push_back(f.metrics.macro_precision);
    rec.push_back(f.metrics.macro_recall);
    f1.push_back(f.metrics.macro_f1);
    auc.push_back(f.roc_auc ? nlohmann::json(*f.roc_auc) : nlohmann::json());
  }
  return {{"mode", r.mode == FoldMode::kRandom ? "random" : "geo"},
          {"k", r.folds.size()},
          {"confusion_matrix", to_json(r.pooled)},
          {"accuracy", summary_json(r.accuracy)},
          {"macro_precision", summary_json(r.macro_precision)},
          {"macro_recall", summary_json(r.macro_recall)},
          {"macro_f1", summary_json(r.macro_f1)},
          {"roc_auc_ovr", summary_json(r.roc_auc)},
          {"per_fold",
           {{"accuracy", acc}, {"macro_precision", prec}, {"macro_recall", rec}, {"macro_f1", f1}, {"roc_auc_ovr", auc}}},
          {"folds", std::move(folds)}};
}

CvReport kfold_cv(std::span<const int> labels, std::span<const std::optional<GeoPoint>> locations, const FoldSpec& spec,
                  const FoldModel& model, std::uint64_t seed, std::size_t classes) {
  const auto fold = assign_folds(labels, locations, spec, seed);
  CvReport report;
  report.mode = spec.mode;
  report.pooled = ConfusionMatrix(classes);
  std::vector<double> acc, prec, rec, f1, auc;
  for (std::size_t f = 0; f < spec.k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < labels.size(); ++i) (fold[i] == f ? test : train).push_back(i);
    if (test.empty() || train.empty()) throw Error(ErrorCode::kInsufficientData, "empty fold");
    const Matrix proba = model(train, test);
    if (proba.rows() != test.size() || proba.cols() != classes) {
      throw Error(ErrorCode::kLengthMismatch, "fold model returned the wrong shape");
    }
    std::vector<int> truth, predicted;
    for (std::size_t r = 0; r < test.size(); ++r) {
      const auto row = proba.row(r);
      truth.push_back(labels[test[r]]);
      predicted.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
    FoldResult fr;
    fr.fold = f;
    fr.train_size = train.size();
    fr.test_size = test.size();
    fr.confusion = confusion_matrix(truth, predicted, classes);
    fr.metrics = classification_metrics(fr.confusion);
    try {
      fr.roc_auc = roc_auc_ovr(proba, truth);
      auc.push_back(*fr.roc_auc);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingleClassInput) throw;
    }
    report.pooled += fr.confusion;
    acc.push_back(fr.metrics.accuracy);
    prec.push_back(fr.metrics.macro_precision);
    rec.push_back(fr.metrics.macro_recall);
    f1.push_back(fr.metrics.macro_f1);
    report.folds.push_back(std::move(fr));
  }
  report.accuracy = summarize(acc);
  report.macro_precision = summarize(prec);
  report.macro_recall = summarize(rec);
  report.macro_f1 = summarize(f1);
  report.roc_auc = summarize(auc);
  return report;
}

nlohmann::json to_json(const DriftSnapshot& s) {
  return {{"window_size", s.window_size},         {"capacity", s.capacity},
          {"window_accuracy", s.window_accuracy}, {"baseline_accuracy", s.baseline_accuracy},
          {"baseline_sigma", s.baseline_sigma},   {"alert", s.alert},
          {"updates", s.updates}};
}

DriftMonitor::DriftMonitor(double baseline_accuracy, std::optional<double> baseline_sigma, std::size_t window,
                           double threshold_sigmas)
    : ring_(window, 0), baseline_(baseline_accuracy), threshold_sigmas_(threshold_sigmas) {
  if (window == 0) throw Error(ErrorCode::kInvalidArgument, "drift window must be positive");
  if (!(baseline_accuracy >= 0.0 && baseline_accuracy <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "baseline accuracy must be in [0, 1]");
  }
  sigma_ = baseline_sigma.value_or(std::sqrt(baseline_accuracy * (1.0 - baseline_accuracy) / static_cast<double>(window)));
  if (!(sigma_ >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "baseline sigma must be nonnegative");
}

bool DriftMonitor::update(int prediction, int outcome) {
  const std::uint8_t hit = prediction == outcome ? 1 : 0;
  if (count_ == ring_.size()) {
    correct_ -= ring_[head_];
  } else {
    ++count_;
  }
  ring_[head_] = hit;
  correct_ += hit;
  head_ = (head_ + 1) % ring_.size();
  ++updates_;
  alert_ = count_ == ring_.size() && window_accuracy() < baseline_ - threshold_sigmas_ * sigma_;
  return alert_;
}

double DriftMonitor::window_accuracy() const noexcept {
  return count_ == 0 ? 0.0 : static_cast<double>(correct_) / static_cast<double>(count_);
}

DriftSnapshot DriftMonitor::snapshot() const {
  return DriftSnapshot{count_, ring_.size(), window_accuracy(), baseline_, sigma_, alert_, updates_};
}

}  // namespace crashcast::evaluation
