// Acceptance gate: one PASS/FAIL line per primary criterion. Thresholds are
// pinned here; the process exits non-zero when any criterion fails.
//
//   crashcast_acceptance [--only <substring>] [--serve-seconds <s>]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crashcast/boosting/ensemble.hpp"
#include "crashcast/error.hpp"
#include "crashcast/evaluation/evaluation.hpp"
#include "crashcast/features/clustering.hpp"
#include "crashcast/features/risk.hpp"
#include "crashcast/hyperopt/hyperopt.hpp"
#include "crashcast/model_bundle.hpp"
#include "crashcast/pipeline/imputation.hpp"
#include "crashcast/pipeline/quality.hpp"
#include "crashcast/pipeline/synthetic.hpp"
#include "crashcast/record_csv.hpp"
#include "crashcast/resampling/resampling.hpp"
#include "crashcast/service/http_api.hpp"
#include "crashcast/service/load_test.hpp"
#include "crashcast/service/prediction_service.hpp"
#include "support/model_oracles.hpp"
#include "support/oracles.hpp"

using namespace crashcast;

namespace {

// ---- pinned thresholds --------------------------------------------------------

constexpr double kFormulaTol = 1e-9;
constexpr std::array<std::size_t, 4> kReferenceCounts{43372, 13364, 2159, 601};
constexpr double kMarginalTolPp = 0.5;
constexpr std::array<std::size_t, 4> kBalancedCounts{15000, 15000, 10000, 5000};
constexpr int kDbscanInstances = 50;
constexpr std::size_t kDbscanMaxPoints = 500;
constexpr std::size_t kSkillRecords = 20000;
constexpr double kSkillAccuracy = 0.85;
constexpr double kSkillMacroF1 = 0.60;
constexpr double kGossSumTol = 0.02;
constexpr int kGossSeeds = 1000;
constexpr double kLocalAccuracyTol = 1e-6;
constexpr int kLocalAccuracyInputs = 1000;
constexpr double kShapleyOracleTol = 0.15;
constexpr double kEfficiencyTol = 1e-9;
constexpr std::size_t kServeClients = 256;
constexpr std::size_t kServeCells = 1000;
constexpr double kServeZipf = 1.1;
constexpr double kServeP95Ms = 100.0;
constexpr double kServeHitRate = 0.87;
constexpr double kCachedFreshTol = 0.02;
constexpr std::size_t kStretchClients = 1000;
constexpr std::size_t kDriftWindow = 1000;
constexpr std::size_t kStationaryUpdates = 10000;
constexpr double kMiceTol = 1e-6;
constexpr std::size_t kFullScale = 59496;

// ---- reporting ------------------------------------------------------------------

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  std::string name;
  std::function<void(Check&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- shared data ----------------------------------------------------------------

std::vector<CrashRecord> synthetic(std::size_t n, std::uint64_t seed, double defect_rate = 0.004) {
  pipeline::SyntheticConfig cfg;
  cfg.n_records = n;
  cfg.seed = seed;
  cfg.defect_rate = defect_rate;
  return pipeline::generate_synthetic(cfg);
}

// Validate, then fill numeric and categorical gaps: the ingestion path every
// model in this gate trains on.
std::vector<CrashRecord> clean(const std::vector<CrashRecord>& raw) {
  const auto thresholds = pipeline::fit_adaptive_thresholds(raw);
  const auto valid = pipeline::validate_batch(raw, thresholds).retained;
  return pipeline::impute_categorical_conditional(pipeline::impute_numeric_mice(valid));
}

LabeledSet featurize(const features::FeatureContext& ctx, const std::vector<CrashRecord>& records) {
  LabeledSet set;
  for (auto name : features::feature_names()) set.feature_names.emplace_back(name);
  set.x = ctx.assemble_all(records);
  for (const auto& r : records) set.y.push_back(static_cast<int>(*r.severity));
  return set;
}

struct SkillData {
  LabeledSet train;
  LabeledSet test;
};

const SkillData& skill_data() {
  static const SkillData data = [] {
    const auto records = clean(synthetic(kSkillRecords, 2024));
    const auto [train_idx, test_idx] = split_indices(records.size(), 0.2, 7);
    std::vector<CrashRecord> train, test;
    for (auto i : train_idx) train.push_back(records[i]);
    for (auto i : test_idx) test.push_back(records[i]);
    const auto ctx = features::FeatureContext::fit(train);
    return SkillData{featurize(ctx, train), featurize(ctx, test)};
  }();
  return data;
}

evaluation::Metrics held_out_metrics(const boosting::Booster& b, const LabeledSet& test) {
  std::vector<int> pred;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto p = b.predict_proba(test.x.row(i));
    pred.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  return evaluation::classification_metrics(evaluation::confusion_matrix(test.y, pred, 4));
}

// ---- criteria -------------------------------------------------------------------

void formula_exactness(Check& c) {
  const std::map<int, double> expected{{4, 0.8}, {5, 0.9}, {6, 0.7}, {1, 0.2}, {2, 0.4}, {3, 0.6}};
  for (const auto& [code, v] : expected) c.require(features::weather_risk(code) == v, "WEATHER1 map");
  c.require(features::weather_risk(std::nullopt) == 0.2 && features::weather_risk(9) == 0.2, "weather default");

  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> category(1, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    CrashRecord r;
    for (auto& f : r.flags) f = coin(rng);
    if (i % 11 == 0) r.flags[index_of(Flag::kWetRoad)].reset();
    r.set_code(CodeField::kWeather1, category(rng));
    const auto e = features::environmental_features(r);
    const double icy = *r.flag(Flag::kIcyRoad), wet = r.flag(Flag::kWetRoad).value_or(false);
    const double snow = *r.flag(Flag::kSnowSlushRoad);
    const double road = std::min(1.0, 0.4 * icy + 0.3 * wet + 0.3 * snow);
    const double wr = expected.at(*r.code(CodeField::kWeather1));
    const double total = std::min(1.0, 0.6 * wr + 0.4 * road);
    const double impairment = std::min(1.0, 0.4 * *r.flag(Flag::kAlcoholRelated) +
                                                0.4 * *r.flag(Flag::kDruggedDriver) +
                                                0.2 * *r.flag(Flag::kMarijuanaRelated));
    const double distraction = std::min(1.0, 0.3 * *r.flag(Flag::kCellPhone) + 0.4 * *r.flag(Flag::kDistracted) +
                                                 0.3 * *r.flag(Flag::kFatigueAsleep));
    const double w = unit(rng), rd = unit(rng), v = unit(rng);
    features::EnvironmentalRiskWeights ew;
    ew.alpha = 0.5;
    ew.beta = 0.3;
    ew.gamma = 0.2;
    const double env = 0.5 * w + 0.3 * rd + 0.2 * v;
    for (double diff : {e.adverse_road - road, e.weather_risk - wr, e.total - total,
                        features::impairment_risk(r) - impairment, features::distraction_risk(r) - distraction,
                        features::environmental_risk_E(w, rd, v, ew) - env}) {
      worst = std::max(worst, std::abs(diff));
    }
  }
  c.require(worst <= kFormulaTol, "weighted sums");
  c.detail << "max |impl - hand| = " << worst << " over 10000 random records";
}

void resampling_exactness(Check& c) {
  const auto records = synthetic(kFullScale, 42, 0.0);
  std::array<std::size_t, 4> counts{};
  for (const auto& r : records) ++counts[static_cast<std::size_t>(*r.severity)];
  for (std::size_t k = 0; k < 4; ++k) {
    const double got = 100.0 * static_cast<double>(counts[k]) / static_cast<double>(records.size());
    const double want = 100.0 * static_cast<double>(kReferenceCounts[k]) / static_cast<double>(kFullScale);
    c.require(std::abs(got - want) <= kMarginalTolPp, "generated marginal " + std::to_string(k));
  }
  // Truncate each class to the reference count (keeping input order).
  std::array<std::size_t, 4> kept{};
  std::vector<CrashRecord> truncated;
  for (const auto& r : records) {
    const auto k = static_cast<std::size_t>(*r.severity);
    if (kept[k] < kReferenceCounts[k]) {
      ++kept[k];
      truncated.push_back(r);
    }
  }
  c.require(kept == kReferenceCounts, "enough records per class");
  const auto data = featurize(features::FeatureContext::fit(truncated), truncated);
  const auto [balanced, report] = resampling::two_stage_balance(data, resampling::reference_under_strategy(),
                                                                resampling::reference_over_strategy(), 42);
  const auto after = balanced.class_counts();
  for (int k = 0; k < 4; ++k) {
    c.require(after.count(k) && after.at(k) == kBalancedCounts[static_cast<std::size_t>(k)],
              "class " + std::to_string(k) + " count");
  }
  c.detail << "start {" << counts[0] << ", " << counts[1] << ", " << counts[2] << ", " << counts[3] << "} -> {"
           << after.at(0) << ", " << after.at(1) << ", " << after.at(2) << ", " << after.at(3) << "}";
}

void clustering_oracle(Check& c) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  int agree = 0;
  for (int trial = 0; trial < kDbscanInstances; ++trial) {
    const std::size_t n = 50 + rng() % (kDbscanMaxPoints - 49);
    std::vector<GeoPoint> centers;
    for (int b = 0, blobs = 1 + static_cast<int>(rng() % 4); b < blobs; ++b) {
      centers.emplace_back(40.0 + 0.2 * u(rng), -77.0 + 0.2 * u(rng));
    }
    std::vector<GeoPoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
      if (u(rng) < 0.3) {
        pts.emplace_back(40.0 + 0.2 * u(rng), -77.0 + 0.2 * u(rng));
      } else {
        const auto& ctr = centers[rng() % centers.size()];
        const double spread = 0.004 + 0.01 * u(rng);
        pts.emplace_back(ctr.lat() + spread * g(rng), ctr.lon() + spread * g(rng));
      }
    }
    features::ClusterParams params;
    params.eps_km = 1.0;
    params.min_samples = 3;
    const auto labels = features::dbscan_haversine(pts, params);
    const auto oracle = testing::brute_dbscan(pts, std::vector<double>(pts.size(), 1.0), 3);
    agree += testing::same_partition(labels, oracle) ? 1 : 0;
  }
  c.require(agree == kDbscanInstances, "partition equivalence");
  c.detail << agree << "/" << kDbscanInstances << " instances equal the brute-force partition";
}

void learner_descent_and_skill(Check& c) {
  const auto& data = skill_data();
  bool monotone = true;
  std::ostringstream skill;
  bool skilled = false;
  for (auto variant : {boosting::BoosterVariant::kDepthwise, boosting::BoosterVariant::kLeafwise}) {
    auto cfg = variant == boosting::BoosterVariant::kDepthwise ? boosting::depthwise_preset()
                                                               : boosting::leafwise_preset();
    // Descent is checked without any row or column subsampling.
    auto plain = cfg;
    plain.subsample = 1.0;
    plain.colsample_bytree = 1.0;
    plain.goss.enabled = false;
    boosting::FitTrace trace;
    boosting::Booster::fit(data.train.x, data.train.y, plain, &trace);
    for (std::size_t r = 1; r < trace.train_logloss.size(); ++r) {
      monotone = monotone && trace.train_logloss[r] <= trace.train_logloss[r - 1];
    }
    const auto preset = boosting::Booster::fit(data.train.x, data.train.y, cfg);
    const auto m = held_out_metrics(preset, data.test);
    skilled = skilled || (m.accuracy >= kSkillAccuracy && m.macro_f1 >= kSkillMacroF1);
    skill << boosting::variant_name(variant) << " acc " << m.accuracy << " macro-F1 " << m.macro_f1 << "; ";
  }
  auto lw = boosting::leafwise_preset();
  lw.subsample = 1.0;
  lw.goss.enabled = false;
  const auto full = boosting::Booster::fit(data.train.x, data.train.y, lw);
  const auto goss = boosting::fit_leafwise_goss(data.train.x, data.train.y, lw, boosting::GossConfig{true, 1.0, 0.0, 0.5});
  const bool goss_exact = full.trees() == goss.trees() && full.base_score() == goss.base_score();
  c.require(monotone, "log-loss non-increasing");
  c.require(skilled, "held-out skill");
  c.require(goss_exact, "GOSS(a=1, b=0) equals full-data training");
  c.detail << skill.str() << "train " << data.train.size() << " / test " << data.test.size()
           << "; descent " << (monotone ? "monotone" : "violated") << "; GOSS full-sample "
           << (goss_exact ? "identical" : "differs");
}

void goss_statistics(Check& c) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(2.0);
  std::vector<double> g(1000);
  std::vector<int> sev(1000);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = e(rng);
    sev[i] = i % 20 == 0 ? 2 : (i % 50 == 1 ? 3 : 0);
  }
  bool weight_exact = true;
  for (const auto& [a, b] : std::vector<std::pair<double, double>>{{0.2, 0.1}, {0.1, 0.3}, {0.3, 0.25}}) {
    const auto s = boosting::goss_sample(g, sev, boosting::GossConfig{true, a, b, 0.5}, 9);
    const double amp = (1.0 - a) / b;
    std::size_t small = 0;
    for (double w : s.weights) {
      if (w != 1.0) {
        weight_exact = weight_exact && w == amp;
        ++small;
      }
    }
    weight_exact = weight_exact && small == static_cast<std::size_t>(std::ceil(b * 1000.0 - 1e-9));
  }
  const double full = std::accumulate(g.begin(), g.end(), 0.0);
  double mean = 0.0;
  for (int seed = 0; seed < kGossSeeds; ++seed) {
    const auto s = boosting::goss_sample(g, sev, boosting::GossConfig{true, 0.2, 0.1, 0.5},
                                         static_cast<std::uint64_t>(seed));
    double sum = 0.0;
    for (std::size_t j = 0; j < s.indices.size(); ++j) sum += s.weights[j] * g[s.indices[j]];
    mean += sum / kGossSeeds;
  }
  const double rel = std::abs(mean / full - 1.0);
  // Equal gradients: the kept top set must be exactly the rare rows.
  std::vector<double> tie(100, 0.4);
  std::vector<int> tie_sev(100, 0);
  for (std::size_t i = 0; i < 100; i += 10) tie_sev[i] = 3;
  const auto t = boosting::goss_sample(tie, tie_sev, boosting::GossConfig{true, 0.1, 0.1, 0.5}, 1);
  bool rare_first = true;
  for (std::size_t j = 0; j < t.indices.size(); ++j) {
    rare_first = rare_first && ((tie_sev[t.indices[j]] == 3) == (t.weights[j] == 1.0));
  }
  c.require(weight_exact, "amplification weight (1-a)/b");
  c.require(rel <= kGossSumTol, "weighted gradient sum");
  c.require(rare_first, "severity weighting on ties");
  c.detail << "weighted/full gradient sum over " << kGossSeeds << " seeds = " << mean / full
           << " (|dev| " << rel << "); amplification exact " << (weight_exact ? "yes" : "no");
}

void attribution(Check& c) {
  // Local accuracy on the served ensemble (interventional against its stored
  // background rows).
  const auto records = clean(synthetic(6000, 99));
  TrainOptions options;
  const auto bundle = train_bundle(records, options);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
  std::normal_distribution<double> jitter(0.0, 0.3);
  double worst_local = 0.0;
  for (int i = 0; i < kLocalAccuracyInputs; ++i) {
    auto x = bundle.features_for(records[pick(rng)]);
    for (std::size_t j = 0; j < x.size(); j += 3) x[j] += jitter(rng);
    if (i % 10 == 0) x[static_cast<std::size_t>(i / 10) % x.size()] = std::nan("");
    const auto ctx = boosting::ContextBucket::from_index(static_cast<std::size_t>(i) % boosting::ContextBucket::kCount);
    const int cls = i % 4;
    const auto a = boosting::attribute_prediction(bundle.ensemble, x, cls, ctx);
    const double total = a.base_value + std::accumulate(a.contributions.begin(), a.contributions.end(), 0.0);
    worst_local = std::max(worst_local, std::abs(total - bundle.ensemble.margin(x, ctx)[static_cast<std::size_t>(cls)]));
  }

  // Brute-force Shapley oracle on boosters over d <= 8 features.
  double worst_oracle = 0.0, worst_efficiency = 0.0;
  for (std::size_t d : {3u, 5u, 8u}) {
    std::mt19937_64 drng(20 + d);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix x(2000, d);
    std::vector<int> y;
    std::vector<double> w(3 * d);
    for (auto& v : w) v = g(drng);
    for (std::size_t i = 0; i < 2000; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = g(drng);
      int best = 0;
      double best_s = -1e300;
      for (int k = 0; k < 3; ++k) {
        double s = 0.5 * g(drng);
        for (std::size_t j = 0; j < d; ++j) s += w[static_cast<std::size_t>(k) * d + j] * x(i, j);
        if (s > best_s) best_s = s, best = k;
      }
      y.push_back(best);
    }
    auto cfg = boosting::depthwise_preset();
    cfg.n_estimators = 40;
    const auto b = boosting::Booster::fit(x, y, cfg);
    std::vector<std::size_t> bg(64);
    std::iota(bg.begin(), bg.end(), 0);
    const auto background = x.select_rows(bg);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
    const boosting::EnsembleModel m(names, {b}, boosting::MetaWeights(1, boosting::MetaOptions{}), background);
    for (int cls = 0; cls < 3; ++cls) {
      const auto f = [&](std::span<const double> z) { return b.predict_margin(z)[static_cast<std::size_t>(cls)]; };
      double bg_mean = 0.0;
      for (std::size_t r = 0; r < background.rows(); ++r) bg_mean += f(background.row(r));
      bg_mean /= static_cast<double>(background.rows());
      for (std::size_t r = 500; r < 510; ++r) {
        const auto row = x.row(r);
        const auto exact = testing::brute_force_shapley(f, row, background);
        const auto a = boosting::attribute_prediction(m, row, cls, boosting::ContextBucket{});
        for (std::size_t j = 0; j < d; ++j) worst_oracle = std::max(worst_oracle, std::abs(a.contributions[j] - exact[j]));
        const double sum = std::accumulate(a.contributions.begin(), a.contributions.end(), 0.0);
        worst_efficiency = std::max(worst_efficiency, std::abs(sum - (f(row) - bg_mean)));
      }
    }
  }
  c.require(worst_local <= kLocalAccuracyTol, "local accuracy");
  c.require(worst_oracle <= kShapleyOracleTol, "Shapley oracle agreement");
  c.require(worst_efficiency <= kEfficiencyTol, "efficiency axiom");
  c.detail << "local accuracy max err " << worst_local << "; oracle max |diff| " << worst_oracle
           << "; efficiency max err " << worst_efficiency;
}

void hpo(Check& c) {
  c.require(hyperopt::scalarize(0.9, 0.5) == 0.85, "scalarize(0.9, 0.5) == 0.85");
  const auto toy = [](const hyperopt::Params& p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.02, 0.02);
    hyperopt::Objectives o;
    o.accuracy = 0.9 - std::abs(p.at("learning_rate") - 0.1) + jitter(rng);
    o.latency = 0.05 * p.at("max_depth") + jitter(rng) + 0.05;
    o.complexity = std::pow(2.0, p.at("max_depth")) * 10 + std::floor(p.at("min_child_weight"));
    return o;
  };
  std::vector<hyperopt::StudyResult> studies;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    studies.push_back(hyperopt::run_study(hyperopt::SearchSpace::reference(), 60, toy, seed));
  }
  // One study on real boosters.
  const auto& data = skill_data();
  std::vector<std::size_t> rows(3000), val(1000);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(val.begin(), val.end(), 0);
  auto base = boosting::depthwise_preset();
  base.n_estimators = 20;
  studies.push_back(hyperopt::run_study(
      hyperopt::SearchSpace::reference(), 8,
      hyperopt::booster_evaluator(data.train.subset(rows), data.test.subset(val), base), 5));
  bool fronts = true, monotone = true;
  for (const auto& s : studies) {
    std::vector<std::size_t> got;
    for (const auto& t : s.front.members()) got.push_back(t.index);
    std::sort(got.begin(), got.end());
    fronts = fronts && got == testing::brute_pareto_indices(s.history);
    std::optional<double> prev;
    for (const auto& b : s.best_so_far) {
      if (prev) monotone = monotone && b && *b >= *prev;
      if (b) prev = b;
    }
  }
  c.require(fronts, "Pareto front equals dominance oracle");
  c.require(monotone, "best-so-far monotone");
  c.detail << "scalarize(0.9, 0.5) = " << hyperopt::scalarize(0.9, 0.5) << "; " << studies.size()
           << " studies checked";
}

void serving(Check& c, double seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = clean(synthetic(kFullScale, 42));
  auto model = std::make_shared<const ModelBundle>(train_bundle(records, TrainOptions{}));
  const auto now = from_civil(2024, 1, 15, 8, 3);
  std::vector<WeatherSnapshot> timeline;
  // Hourly observations on the hour, so weather is constant within a bucket.
  const auto hour = from_civil(2024, 1, 15, 8, 0);
  for (int h = -30; h <= 30; ++h) {
    auto w = nominal_weather(h % 5 == 0 ? 4 : (h % 3 == 0 ? 3 : 1));
    w.observed_at = hour + std::chrono::hours(h);
    timeline.push_back(w);
  }
  auto weather = std::make_shared<service::FixtureWeatherSource>(timeline);
  auto clock = std::make_shared<service::ManualClock>(now);
  auto store = std::make_shared<service::CrashStore>();
  store->insert(records);
  service::PredictionService svc(model, store, weather, clock);
  const auto refresh = svc.refresh_primary();
  const std::size_t active = svc.active_cells().size();
  c.require(active >= kServeCells, "at least 1000 active cells");

  service::HttpApi api(svc);
  service::HttpServer server(api, svc.config().server_threads);
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  service::LoadProfile profile;
  profile.url = "http://127.0.0.1:" + std::to_string(port);
  profile.concurrency = kServeClients;
  profile.duration_s = seconds;
  profile.zipf = kServeZipf;
  profile.max_targets = kServeCells;
  const auto main = service::run_load_test(profile);
  profile.what_if_fraction = 1.0;
  const auto lru_only = service::run_load_test(profile);
  server.stop();

  // Stretch run on a server sized for one thread per keep-alive connection.
  service::HttpServer stretch_server(api, kStretchClients + 64);
  const int stretch_port = stretch_server.bind("127.0.0.1", 0);
  stretch_server.start();
  profile.url = "http://127.0.0.1:" + std::to_string(stretch_port);
  profile.what_if_fraction = 0.0;
  profile.concurrency = kStretchClients;
  const auto stretch = service::run_load_test(profile);
  stretch_server.stop();

  // Cached answers against a fresh computation at the exact request point and
  // time, for random points inside every active cell.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto bucket_start = bucket_start_15m(time_bucket_15m(now));
  double worst = 0.0;
  std::size_t compared = 0, not_primary = 0;
  for (const auto& cell : svc.active_cells()) {
    const auto centre = cell.center();
    const double half = 180.0 / std::pow(2.0, cell.resolution) / 2.0;
    for (int s = 0; s < 2; ++s) {
      const GeoPoint p(centre.lat() + half * (2.0 * unit(rng) - 1.0) * 0.999,
                       centre.lon() + half * (2.0 * unit(rng) - 1.0) * 0.999);
      const Timestamp at = bucket_start + std::chrono::seconds(static_cast<long>(unit(rng) * 899.0));
      service::PredictionRequest request;
      request.location = p;
      request.at = at;
      const auto cached = svc.predict(request);
      if (cached.tier != service::CacheTier::kPrimary) ++not_primary;
      const auto fresh = svc.compute_at(p, at, weather->current(p, at));
      worst = std::max(worst, std::abs(cached.core->risk_score - fresh->risk_score));
      ++compared;
    }
  }

  c.require(main.targets == kServeCells, "1000 targeted cells");
  c.require(main.p95_ms <= kServeP95Ms, "p95 latency");
  c.require(main.server_tiers.hit_rate() >= kServeHitRate, "hit rate");
  c.require(worst <= kCachedFreshTol, "cached vs fresh");
  c.require(not_primary == 0, "in-cell requests hit the primary cache");
  c.detail << active << " active cells (refresh " << refresh.seconds << " s); " << kServeClients << " clients x "
           << main.duration_s << " s: p50 " << main.p50_ms << " p95 " << main.p95_ms << " p99 " << main.p99_ms
           << " ms, " << main.throughput_rps << " rps, errors " << main.errors << ", hit rate "
           << main.server_tiers.hit_rate() << "; cached-vs-fresh max |diff| " << worst << " over " << compared
           << " in-cell points; [reported] what-if only (secondary LRU): hit rate "
           << lru_only.server_tiers.hit_rate() << " p95 " << lru_only.p95_ms << " ms; [reported, stretch] "
           << kStretchClients << " clients: p95 " << stretch.p95_ms << " ms, hit rate "
           << stretch.server_tiers.hit_rate() << ", errors " << stretch.errors << "; total "
           << seconds_since(t0) << " s";
}

void evaluation_oracles(Check& c) {
  // Hand-computed reference: rows are truth, columns predictions.
  const int m[4][4] = {{50, 5, 0, 0}, {2, 20, 3, 0}, {1, 1, 8, 2}, {0, 0, 1, 3}};
  evaluation::ConfusionMatrix cm(4);
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) cm.add(t, p, static_cast<std::size_t>(m[t][p]));
  }
  const auto metrics = evaluation::classification_metrics(cm);
  const double precision[4] = {50.0 / 53.0, 20.0 / 26.0, 8.0 / 12.0, 3.0 / 5.0};
  const double recall[4] = {50.0 / 55.0, 20.0 / 25.0, 8.0 / 12.0, 3.0 / 4.0};
  const double f1[4] = {100.0 / 108.0, 40.0 / 51.0, 16.0 / 24.0, 6.0 / 9.0};
  bool hand = std::abs(metrics.accuracy - 81.0 / 96.0) < 1e-12;
  double macro_p = 0, macro_r = 0, macro_f = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    hand = hand && std::abs(metrics.per_class[k].precision - precision[k]) < 1e-12 &&
           std::abs(metrics.per_class[k].recall - recall[k]) < 1e-12 &&
           std::abs(metrics.per_class[k].f1 - f1[k]) < 1e-12;
    macro_p += precision[k] / 4.0;
    macro_r += recall[k] / 4.0;
    macro_f += f1[k] / 4.0;
  }
  hand = hand && std::abs(metrics.macro_precision - macro_p) < 1e-12 &&
         std::abs(metrics.macro_recall - macro_r) < 1e-12 && std::abs(metrics.macro_f1 - macro_f) < 1e-12;
  // A matrix with a class never predicted: its precision counts as zero.
  evaluation::ConfusionMatrix absent(4);
  absent.add(0, 0, 10);
  absent.add(1, 1, 5);
  absent.add(2, 1, 5);
  absent.add(3, 3, 2);
  const auto am = evaluation::classification_metrics(absent);
  hand = hand && am.per_class[2].precision == 0.0 && am.per_class[2].f1 == 0.0 &&
         std::abs(am.macro_recall - (1.0 + 1.0 + 0.0 + 1.0) / 4.0) < 1e-12;
  c.require(hand, "hand-computed metrics");

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> label(0, 3), coarse(0, 9);
  double worst_auc = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 40 + static_cast<std::size_t>(trial) * 7;
    Matrix scores(n, 4);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(trial % 5 == 0 ? label(rng) % 3 : label(rng));
      std::vector<double> row;
      for (std::size_t k = 0; k < 4; ++k) {
        scores(i, k) = coarse(rng) / 10.0;  // coarse grid so ties occur
        row.push_back(scores(i, k));
      }
      rows.push_back(row);
    }
    worst_auc = std::max(worst_auc, std::abs(evaluation::roc_auc_ovr(scores, labels) -
                                             testing::pairwise_auc_ovr(rows, labels, 4)));
  }
  c.require(worst_auc < 1e-12, "AUC equals pairwise oracle");

  // 5-fold CV on the skill set with a small booster.
  const auto& data = skill_data();
  auto cfg = boosting::depthwise_preset();
  cfg.n_estimators = 15;
  std::vector<std::optional<GeoPoint>> nowhere(data.train.size());
  const auto report = evaluation::kfold_cv(
      data.train.y, nowhere, evaluation::FoldSpec{},
      [&](const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) {
        const auto tr = data.train.subset(train);
        const auto b = boosting::Booster::fit(tr.x, tr.y, cfg);
        Matrix out(test.size(), 4);
        for (std::size_t i = 0; i < test.size(); ++i) {
          const auto p = b.predict_proba(data.train.x.row(test[i]));
          std::copy(p.begin(), p.end(), out.row(i).begin());
        }
        return out;
      },
      3);
  std::vector<double> fold_acc;
  for (const auto& f : report.folds) fold_acc.push_back(f.metrics.accuracy);
  const double std_err = std::abs(report.accuracy.std - testing::two_pass_sample_std(fold_acc));
  c.require(report.folds.size() == 5 && std_err < 1e-12, "CV std matches two-pass");

  // Drift: a stationary stream never alerts; a planted 5-sigma drop alerts
  // within one window.
  const double p = 0.85;
  evaluation::DriftMonitor quiet(p, std::nullopt, kDriftWindow);
  std::mt19937_64 drng(77);
  std::bernoulli_distribution hit(p);
  std::size_t false_alarms = 0;
  for (std::size_t i = 0; i < kStationaryUpdates; ++i) false_alarms += quiet.update(0, hit(drng) ? 0 : 1) ? 1 : 0;
  // Gate: noisy pre-change history, then outcomes whose hit rate is exactly
  // p - 5 sigma (evenly spread hits, varying phase).
  std::size_t worst_delay = 0, missed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    evaluation::DriftMonitor monitor(p, std::nullopt, kDriftWindow);
    std::mt19937_64 srng(1000 + seed);
    std::bernoulli_distribution before(p);
    const double q = p - 5.0 * monitor.baseline_sigma();
    const double phase = static_cast<double>(seed) / 20.0;
    for (std::size_t i = 0; i < 2 * kDriftWindow; ++i) monitor.update(0, before(srng) ? 0 : 1);
    std::size_t delay = 0;
    for (std::size_t i = 1; i <= kDriftWindow; ++i) {
      const bool correct = std::floor(static_cast<double>(i) * q + phase) >
                           std::floor(static_cast<double>(i - 1) * q + phase);
      if (monitor.update(0, correct ? 0 : 1)) {
        delay = i;
        break;
      }
    }
    if (delay == 0) ++missed;
    worst_delay = std::max(worst_delay, delay);
  }
  // Reported only: post-change outcomes drawn as Bernoulli(p - 5 sigma), where
  // detection within W is probabilistic.
  std::size_t bernoulli_detected = 0;
  constexpr std::size_t kBernoulliStreams = 200;
  for (std::uint64_t seed = 0; seed < kBernoulliStreams; ++seed) {
    evaluation::DriftMonitor monitor(p, std::nullopt, kDriftWindow);
    std::mt19937_64 srng(5000 + seed);
    std::bernoulli_distribution before(p), after(p - 5.0 * monitor.baseline_sigma());
    for (std::size_t i = 0; i < 2 * kDriftWindow; ++i) monitor.update(0, before(srng) ? 0 : 1);
    for (std::size_t i = 1; i <= kDriftWindow; ++i) {
      if (monitor.update(0, after(srng) ? 0 : 1)) {
        ++bernoulli_detected;
        break;
      }
    }
  }
  c.require(false_alarms == 0, "no alert on a stationary stream");
  c.require(missed == 0, "alert within one window of a 5-sigma drop");
  c.detail << "hand metrics " << (hand ? "match" : "differ") << "; AUC max |diff| " << worst_auc
           << "; CV std " << report.accuracy.std << " (err " << std_err << "); drift false alarms "
           << false_alarms << " over " << kStationaryUpdates << ", worst detection delay " << worst_delay << "/"
           << kDriftWindow << "; [reported] Bernoulli post-change streams detected within W: " << bernoulli_detected
           << "/" << kBernoulliStreams;
}

void pipeline_invariants(Check& c) {
  // Conservation on defect-rich batches.
  bool conserved = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rs = synthetic(2000, 300 + seed, 0.05);
    const auto res = pipeline::validate_batch(rs, pipeline::fit_adaptive_thresholds(rs, 1.0 + seed % 3));
    conserved = conserved && res.report.retained_count + res.report.rejected_total() == res.report.input_count &&
                res.report.input_count == rs.size() && res.retained.size() == res.report.retained_count;
  }
  c.require(conserved, "validate_batch conservation");

  // Imputation never writes observed cells.
  auto rs = synthetic(3000, 31);
  std::mt19937_64 rng(7);
  for (auto& r : rs) {
    for (auto& f : r.flags) {
      if (rng() % 6 == 0) f.reset();
    }
    for (auto& code : r.codes) {
      if (rng() % 6 == 0) code.reset();
    }
    if (rng() % 8 == 0) r.hour_of_day.reset();
    if (rng() % 8 == 0) r.occurred_at.reset();
  }
  const auto thresholds = pipeline::fit_adaptive_thresholds(rs);
  const auto valid = pipeline::validate_batch(rs, thresholds).retained;
  const auto numeric = pipeline::impute_numeric_mice(valid);
  const auto filled = pipeline::impute_categorical_conditional(numeric);
  bool untouched = filled.size() == valid.size();
  for (std::size_t i = 0; untouched && i < valid.size(); ++i) {
    const auto& a = valid[i];
    const auto& b = filled[i];
    for (std::size_t f = 0; f < kFlagCount; ++f) untouched = untouched && (!a.flags[f] || a.flags[f] == b.flags[f]);
    for (std::size_t k = 0; k < kCodeCount; ++k) untouched = untouched && (!a.codes[k] || a.codes[k] == b.codes[k]);
    untouched = untouched && (!a.location || a.location == b.location) &&
                (!a.hour_of_day || a.hour_of_day == b.hour_of_day) && a.occurred_at == b.occurred_at &&
                a.severity == b.severity;
  }
  c.require(untouched, "observed cells untouched");

  // MICE recovers an exact planted relation B = 2A.
  pipeline::NumericTable t({"A", "B", "C"}, 1000);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double a = n(rng);
    t.set(r, 0, a);
    t.set(r, 1, 2.0 * a);
    t.set(r, 2, n(rng));
    if (r % 10 == 3) t.set_missing(r, 1);
  }
  const auto mice = pipeline::impute_mice(t);
  double mice_err = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (!t.observed(r, 1)) mice_err = std::max(mice_err, std::abs(mice.completed.value(r, 1) - 2.0 * t.value(r, 0)));
  }
  c.require(mice_err <= kMiceTol, "MICE planted relation");

  // Marginals at full scale.
  const auto full = synthetic(kFullScale, 42);
  const std::array<double, 4> reference_pct{72.9, 22.5, 3.6, 1.0};
  std::array<std::size_t, 4> counts{};
  std::size_t labelled = 0;
  for (const auto& r : full) {
    if (r.severity) {
      ++counts[static_cast<std::size_t>(*r.severity)];
      ++labelled;
    }
  }
  double worst_pp = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    worst_pp = std::max(worst_pp, std::abs(100.0 * static_cast<double>(counts[k]) / static_cast<double>(labelled) -
                                           reference_pct[k]));
  }
  c.require(worst_pp <= kMarginalTolPp, "marginals");

  // Whole pipeline twice: byte-identical artifacts.
  const auto run = [] {
    std::ostringstream out;
    const auto raw = synthetic(4000, 55);
    write_records_csv(out, raw);
    const auto cleaned = clean(raw);
    write_records_csv(out, cleaned);
    const auto ctx = features::FeatureContext::fit(cleaned);
    const auto set = featurize(ctx, cleaned);
    write_labeled_csv(out, set);
    resampling::ClassTargets under{{0, 1500}}, over{{1, 1500}, {2, 800}, {3, 400}};
    write_labeled_csv(out, resampling::two_stage_balance(set, under, over, 9).first);
    TrainOptions options;
    options.depthwise.n_estimators = 30;
    options.leafwise.n_estimators = 30;
    out << to_json(train_bundle(cleaned, options)).dump();
    return out.str();
  };
  const auto first = run(), second = run();
  c.require(first == second, "seed determinism");
  c.detail << "conservation " << (conserved ? "holds" : "broken") << "; MICE max err " << mice_err
           << "; marginal max dev " << worst_pp << " pp at n=" << kFullScale << "; pipeline artifacts "
           << (first == second ? "byte-identical" : "differ") << " (" << first.size() << " bytes)";
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  double serve_seconds = 15.0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = argv[++i];
    else if (std::strcmp(argv[i], "--serve-seconds") == 0 && i + 1 < argc) serve_seconds = std::stod(argv[++i]);
    else {
      std::cerr << "usage: crashcast_acceptance [--only <substring>] [--serve-seconds <s>]\n";
      return 2;
    }
  }
  const std::vector<Criterion> criteria{
      {"formula exactness (environmental features)", formula_exactness},
      {"resampling exactness", resampling_exactness},
      {"clustering oracle", clustering_oracle},
      {"learner descent + skill", learner_descent_and_skill},
      {"GOSS statistics", goss_statistics},
      {"attribution", attribution},
      {"hyperparameter optimization", hpo},
      {"serving latency and cache", [serve_seconds](Check& c) { serving(c, serve_seconds); }},
      {"evaluation oracles", evaluation_oracles},
      {"pipeline invariants", pipeline_invariants},
  };
  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!only.empty() && criterion.name.find(only) == std::string::npos) continue;
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criterion.run(check);
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail << " [exception: " << e.what() << "]";
    }
    failures += check.ok ? 0 : 1;
    std::cout << (check.ok ? "PASS" : "FAIL") << "  " << criterion.name << " (" << seconds_since(t0)
              << " s): " << check.detail.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
