#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "crashcast/cell_index.hpp"
#include "crashcast/error.hpp"
#include "crashcast/evaluation/evaluation.hpp"
#include "crashcast/pipeline/synthetic.hpp"
#include "support/model_oracles.hpp"

using namespace crashcast;
using namespace crashcast::evaluation;

namespace {

ConfusionMatrix two_class_example() {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 8);
  cm.add(0, 1, 2);
  cm.add(1, 0, 3);
  cm.add(1, 1, 7);
  return cm;
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix m(0, rows.front().size());
  for (const auto& r : rows) m.append_row(r);
  return m;
}

// Scores that are noisy indicators of the true class.
std::vector<std::vector<double>> noisy_scores(const std::vector<int>& labels, int classes, std::mt19937_64& rng,
                                              bool coarse) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> out;
  for (int y : labels) {
    std::vector<double> row(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
      double v = noise(rng) + (c == y ? 1.0 : 0.0);
      if (coarse) v = std::round(v * 2.0) / 2.0;  // forces many ties
      row[static_cast<std::size_t>(c)] = v;
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace

TEST(ConfusionMatrix, CountsAndBounds) {
  const std::vector<int> truth{0, 1, 2, 3, 3, 1};
  const std::vector<int> pred{0, 2, 2, 3, 1, 1};
  const auto cm = confusion_matrix(truth, pred);
  EXPECT_EQ(cm.total(), 6u);
  EXPECT_EQ(cm(1, 2), 1u);
  EXPECT_EQ(cm(3, 1), 1u);
  EXPECT_EQ(cm.row_sum(3), 2u);
  EXPECT_EQ(cm.col_sum(1), 2u);
  const std::vector<int> short_pred{0, 1};
  EXPECT_THROW(confusion_matrix(truth, short_pred), Error);
  try {
    confusion_matrix(truth, short_pred);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
  const std::vector<int> bad{0, 1, 2, 3, 4, 1};
  EXPECT_THROW(confusion_matrix(truth, bad), Error);
}

TEST(Metrics, TwoClassReference) {
  const auto m = classification_metrics(two_class_example());
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.per_class[0].precision, 8.0 / 11.0);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 0.8);
  EXPECT_DOUBLE_EQ(m.per_class[1].precision, 7.0 / 9.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].recall, 0.7);
  const double f0 = 2.0 * (8.0 / 11.0) * 0.8 / (8.0 / 11.0 + 0.8);
  const double f1 = 2.0 * (7.0 / 9.0) * 0.7 / (7.0 / 9.0 + 0.7);
  EXPECT_DOUBLE_EQ(m.macro_f1, (f0 + f1) / 2.0);
}

TEST(Metrics, AbsentClassContributesZero) {
  const std::vector<int> truth{0, 0, 1, 1};
  const std::vector<int> pred{0, 0, 1, 1};
  const auto m = classification_metrics(confusion_matrix(truth, pred, 4));
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.per_class[2].recall, 0.0);
  EXPECT_DOUBLE_EQ(m.per_class[3].precision, 0.0);
  EXPECT_DOUBLE_EQ(m.macro_recall, 0.5);
  EXPECT_DOUBLE_EQ(m.macro_f1, 0.5);
}

TEST(Metrics, EmptyMatrixThrows) {
  try {
    classification_metrics(ConfusionMatrix(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMatrix);
  }
}

TEST(Metrics, RangeInvariantsOnRandomMatrices) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> label(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> t(50), p(50);
    for (auto& v : t) v = label(rng);
    for (auto& v : p) v = label(rng);
    const auto m = classification_metrics(confusion_matrix(t, p));
    for (double v : {m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (const auto& c : m.per_class) {
      EXPECT_LE(c.f1, std::max(c.precision, c.recall) + 1e-12);
      EXPECT_GE(c.f1 + 1e-12, std::min(c.precision, c.recall));
    }
  }
}

TEST(RocAuc, MatchesPairwiseOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> label(0, 3);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<int> labels(120);
    for (auto& v : labels) v = label(rng);
    if (trial % 5 == 0) std::replace(labels.begin(), labels.end(), 3, 0);  // a class absent from truth
    const auto scores = noisy_scores(labels, 4, rng, trial % 2 == 0);
    EXPECT_NEAR(roc_auc_ovr(to_matrix(scores), labels), crashcast::testing::pairwise_auc_ovr(scores, labels, 4), 1e-12);
  }
}

TEST(RocAuc, PerfectAndConstantScores) {
  const std::vector<int> labels{0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(roc_auc_ovr(to_matrix({{1, 0}, {0, 1}, {1, 0}, {0, 1}}), labels), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc_ovr(to_matrix({{.5, .5}, {.5, .5}, {.5, .5}, {.5, .5}}), labels), 0.5);
}

TEST(RocAuc, Errors) {
  const std::vector<int> one{1, 1, 1};
  try {
    roc_auc_ovr(to_matrix({{0, 1}, {0, 1}, {0, 1}}), one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClassInput);
  }
  const std::vector<int> two{0, 1};
  EXPECT_THROW(roc_auc_ovr(to_matrix({{0, 1}}), two), Error);
  EXPECT_THROW(roc_auc_ovr(to_matrix({{0, NAN}, {1, 0}}), two), Error);
}

TEST(Folds, RandomIsAStratifiedPartition) {
  std::vector<int> labels;
  for (int i = 0; i < 1000; ++i) labels.push_back(i % 10 == 0 ? 2 : (i % 3 == 0 ? 1 : 0));
  const FoldSpec spec{5, FoldMode::kRandom, 4};
  const auto fold = assign_folds(labels, {}, spec, 3);
  ASSERT_EQ(fold.size(), labels.size());
  std::map<int, std::vector<std::size_t>> per_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ASSERT_LT(fold[i], 5u);
    auto& counts = per_class[labels[i]];
    counts.resize(5);
    ++counts[fold[i]];
  }
  for (const auto& [label, counts] : per_class) {
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(*hi - *lo, 1u) << "class " << label;
  }
  EXPECT_EQ(fold, assign_folds(labels, {}, spec, 3));
  EXPECT_NE(fold, assign_folds(labels, {}, spec, 4));
}

TEST(Folds, GeographicKeepsCellsTogether) {
  auto cfg = pipeline::SyntheticConfig{};
  cfg.n_records = 3000;
  cfg.seed = 8;
  const auto records = pipeline::generate_synthetic(cfg);
  std::vector<int> labels;
  std::vector<std::optional<GeoPoint>> locations;
  for (const auto& r : records) {
    labels.push_back(r.severity ? static_cast<int>(*r.severity) : 0);
    locations.push_back(r.location);
  }
  const FoldSpec spec{5, FoldMode::kGeographic, 8};
  const auto fold = assign_folds(labels, locations, spec, 1);
  std::map<std::uint64_t, std::set<std::size_t>> folds_of_cell;
  std::vector<std::size_t> sizes(5, 0);
  for (std::size_t i = 0; i < fold.size(); ++i) {
    ++sizes[fold[i]];
    if (locations[i]) folds_of_cell[cell_of(*locations[i], 8).key()].insert(fold[i]);
  }
  for (const auto& [cell, folds] : folds_of_cell) EXPECT_EQ(folds.size(), 1u);
  for (std::size_t s : sizes) EXPECT_GT(s, 0u);
}

TEST(Folds, InsufficientData) {
  const std::vector<int> labels{0, 1, 0};
  try {
    assign_folds(labels, {}, FoldSpec{5, FoldMode::kRandom, 4}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
  const std::vector<std::optional<GeoPoint>> same(3, GeoPoint(40.0, -75.0));
  try {
    assign_folds(labels, same, FoldSpec{2, FoldMode::kGeographic, 8}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
  EXPECT_THROW(assign_folds(labels, {}, FoldSpec{1, FoldMode::kRandom, 4}, 0), Error);
}

TEST(Summary, MatchesTwoPassOracle) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d(1e6, 1.0);  // large offset stresses cancellation
  for (int n = 2; n < 30; ++n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = d(rng);
    EXPECT_NEAR(summarize(v).std, crashcast::testing::two_pass_sample_std(v), 1e-9);
  }
  EXPECT_EQ(summarize({0.7, 0.7}).std, 0.0);
}

TEST(KFold, PooledMatrixCoversEverySampleOnce) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> label(0, 3);
  std::vector<int> labels(400);
  for (auto& v : labels) v = label(rng);
  std::size_t calls = 0;
  // Predicts the training majority class with a soft indicator.
  const FoldModel model = [&](const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) {
    ++calls;
    std::vector<double> freq(4, 0.0);
    for (std::size_t i : train) freq[static_cast<std::size_t>(labels[i])] += 1.0;
    for (auto& f : freq) f /= static_cast<double>(train.size());
    Matrix out(0, 4);
    for (std::size_t i : test) {
      auto row = freq;
      row[static_cast<std::size_t>(labels[i])] += (i % 3 == 0) ? 0.5 : 0.0;
      out.append_row(row);
    }
    return out;
  };
  const auto report = kfold_cv(labels, {}, FoldSpec{4, FoldMode::kRandom, 4}, model, 1);
  EXPECT_EQ(calls, 4u);
  EXPECT_EQ(report.pooled.total(), labels.size());
  std::vector<double> acc;
  for (const auto& f : report.folds) {
    EXPECT_EQ(f.train_size + f.test_size, labels.size());
    acc.push_back(f.metrics.accuracy);
  }
  EXPECT_NEAR(report.accuracy.std, crashcast::testing::two_pass_sample_std(acc), 1e-12);
  const auto doc = to_json(report);
  EXPECT_EQ(doc["confusion_matrix"].size(), 4u);
  EXPECT_EQ(doc["confusion_matrix"][0].size(), 4u);
  EXPECT_EQ(doc["per_fold"]["accuracy"].size(), 4u);
  EXPECT_EQ(doc["mode"], "random");
}

TEST(KFold, IdenticalFoldsHaveZeroStd) {
  std::vector<int> labels(100);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  const FoldModel perfect = [&](const std::vector<std::size_t>&, const std::vector<std::size_t>& test) {
    Matrix out(0, 4);
    for (std::size_t i : test) {
      std::vector<double> row(4, 0.0);
      row[static_cast<std::size_t>(labels[i])] = 1.0;
      out.append_row(row);
    }
    return out;
  };
  const auto report = kfold_cv(labels, {}, FoldSpec{2, FoldMode::kRandom, 4}, perfect, 0);
  EXPECT_DOUBLE_EQ(report.accuracy.mean, 1.0);
  EXPECT_EQ(report.accuracy.std, 0.0);
  EXPECT_DOUBLE_EQ(report.roc_auc.mean, 1.0);
}

TEST(KFold, RecordPipelineEndToEnd) {
  auto cfg = pipeline::SyntheticConfig{};
  cfg.n_records = 1500;
  cfg.seed = 21;
  const auto records = pipeline::generate_synthetic(cfg);
  TrainOptions options;
  options.depthwise.n_estimators = 20;
  options.leafwise.n_estimators = 20;
  const auto report = cross_validate_records(records, FoldSpec{3, FoldMode::kGeographic, 8}, options, 5);
  std::size_t labelled = 0;
  for (const auto& r : records) labelled += r.severity ? 1 : 0;
  EXPECT_EQ(report.pooled.total(), labelled);
  EXPECT_GT(report.accuracy.mean, 0.5);
}

TEST(Drift, StationaryStreamStaysQuiet) {
  const double p = 0.85;
  DriftMonitor monitor(p);
  EXPECT_NEAR(monitor.baseline_sigma(), std::sqrt(p * (1 - p) / 1000.0), 1e-15);
  std::mt19937_64 rng(77);
  std::bernoulli_distribution hit(p);
  for (int i = 0; i < 10000; ++i) EXPECT_FALSE(monitor.update(0, hit(rng) ? 0 : 1)) << "update " << i;
  EXPECT_EQ(monitor.size(), 1000u);
}

TEST(Drift, FiveSigmaDropAlertsWithinOneWindow) {
  const double p = 0.85;
  const std::size_t w = 1000;
  DriftMonitor monitor(p, std::nullopt, w);
  const double sigma = monitor.baseline_sigma();
  std::mt19937_64 rng(78);
  std::bernoulli_distribution before(p), after(p - 5.0 * sigma);
  for (std::size_t i = 0; i < 2 * w; ++i) monitor.update(0, before(rng) ? 0 : 1);
  std::size_t first_alert = 0;
  for (std::size_t i = 1; i <= w; ++i) {
    if (monitor.update(0, after(rng) ? 0 : 1)) {
      first_alert = i;
      break;
    }
  }
  EXPECT_GT(first_alert, 0u);
  EXPECT_LE(first_alert, w);
}

TEST(Drift, NoAlertUntilWindowIsFull) {
  DriftMonitor monitor(0.9, std::nullopt, 100);
  for (int i = 0; i < 99; ++i) EXPECT_FALSE(monitor.update(0, 1));
  EXPECT_TRUE(monitor.update(0, 1));
  const auto snap = monitor.snapshot();
  EXPECT_EQ(snap.window_size, 100u);
  EXPECT_DOUBLE_EQ(snap.window_accuracy, 0.0);
  EXPECT_TRUE(to_json(snap)["alert"].get<bool>());
}

TEST(Drift, WindowMatchesRecomputedAccuracy) {
  DriftMonitor monitor(0.5, std::nullopt, 37);
  std::mt19937_64 rng(4);
  std::bernoulli_distribution hit(0.6);
  std::vector<int> outcomes;
  for (int i = 0; i < 500; ++i) {
    const int o = hit(rng) ? 1 : 0;
    outcomes.push_back(o);
    monitor.update(1, o);
    const std::size_t from = outcomes.size() > 37 ? outcomes.size() - 37 : 0;
    double s = 0;
    for (std::size_t j = from; j < outcomes.size(); ++j) s += outcomes[j];
    EXPECT_DOUBLE_EQ(monitor.window_accuracy(), s / static_cast<double>(outcomes.size() - from));
  }
}
