#include "crashcast/model_bundle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "crashcast/error.hpp"

namespace crashcast {

features::FeatureVector ModelBundle::features_for(const CrashRecord& record,
                                                  const std::optional<WeatherSnapshot>& weather) const {
  return context.assemble(record, weather);
}

boosting::ContextBucket ModelBundle::context_for(const CrashRecord& record,
                                                 const std::optional<WeatherSnapshot>& weather) const {
  if (!weather) return boosting::context_of(record);
  CrashRecord r = record;
  r.set_code(CodeField::kWeather1, weather->category);
  return boosting::context_of(r);
}

boosting::EnsemblePrediction ModelBundle::predict(const CrashRecord& record,
                                                  const std::optional<WeatherSnapshot>& weather) const {
  const auto x = features_for(record, weather);
  return ensemble.predict(x, context_for(record, weather));
}

nlohmann::json to_json(const ModelBundle& bundle) {
  return {{"version", ModelBundle::kVersion},
          {"feature_context", features::to_json(bundle.context)},
          {"ensemble", boosting::to_json(bundle.ensemble)},
          {"drift_baseline", {{"accuracy", bundle.baseline.accuracy}, {"samples", bundle.baseline.samples}}}};
}

ModelBundle bundle_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != ModelBundle::kVersion) {
      throw Error(ErrorCode::kMalformedDocument, "model bundle: unsupported version");
    }
    ModelBundle b;
    b.context = features::feature_context_from_json(doc.at("feature_context"));
    b.ensemble = boosting::ensemble_from_json(doc.at("ensemble"));
    const auto& drift = doc.at("drift_baseline");
    b.baseline = DriftBaseline{drift.at("accuracy").get<double>(), drift.at("samples").get<std::size_t>()};
    if (b.ensemble.feature_names().size() != features::kFeatureCount) {
      throw Error(ErrorCode::kMalformedDocument, "model bundle: ensemble feature count");
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("model bundle: ") + e.what());
  }
}

void save_bundle(const std::string& path, const ModelBundle& bundle) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kUnreadableFile, "cannot write " + path);
  out << to_json(bundle).dump() << '\n';
  if (!out) throw Error(ErrorCode::kUnreadableFile, "write failed: " + path);
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot read " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, path + ": " + e.what());
  }
  return bundle_from_json(doc);
}

nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json doc{{"train_size", r.train_size},
                     {"validation_size", r.validation_size},
                     {"booster_validation_accuracy", r.booster_validation_accuracy},
                     {"ensemble_validation_accuracy", r.ensemble_validation_accuracy},
                     {"fit_seconds", r.fit_seconds}};
  if (r.resample) doc["resample"] = resampling::to_json(*r.resample);
  return doc;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double validation_fraction,
                                                                            std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "validation_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {std::move(train), std::move(val)};
}

ModelBundle train_bundle(std::span<const CrashRecord> records, const TrainOptions& options, TrainReport* report) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<CrashRecord> labelled;
  for (const auto& r : records) {
    if (r.severity) labelled.push_back(r);
  }
  if (labelled.size() < 20) throw Error(ErrorCode::kInsufficientData, "training needs at least 20 labelled records");

  const auto [train_idx, val_idx] = split_indices(labelled.size(), options.validation_fraction, options.seed);
  std::vector<CrashRecord> train, val;
  for (auto i : train_idx) train.push_back(labelled[i]);
  for (auto i : val_idx) val.push_back(labelled[i]);

  ModelBundle bundle;
  bundle.context = features::FeatureContext::fit(train, options.features);

  LabeledSet train_set;
  for (const auto& name : features::feature_names()) train_set.feature_names.emplace_back(name);
  train_set.x = bundle.context.assemble_all(train);
  std::vector<std::size_t> background_rows;
  const std::size_t stride = std::max<std::size_t>(1, train.size() / std::max<std::size_t>(1, options.background_rows));
  for (std::size_t i = 0; i < train.size() && background_rows.size() < options.background_rows; i += stride) {
    background_rows.push_back(i);
  }
  Matrix background = train_set.x.select_rows(background_rows);
  for (const auto& r : train) train_set.y.push_back(static_cast<int>(*r.severity));

  TrainReport local;
  if (options.under || options.over) {
    auto [balanced, rr] = resampling::two_stage_balance(train_set, options.under.value_or(resampling::ClassTargets{}),
                                                        options.over.value_or(resampling::ClassTargets{}), options.seed);
    train_set = std::move(balanced);
    local.resample = rr;
  }

  auto depthwise = options.depthwise;
  auto leafwise = options.leafwise;
  depthwise.variant = boosting::BoosterVariant::kDepthwise;
  leafwise.variant = boosting::BoosterVariant::kLeafwise;
  depthwise.seed = options.seed;
  leafwise.seed = options.seed + 1;
  std::vector<boosting::Booster> boosters;
  boosters.push_back(boosting::Booster::fit(train_set.x, train_set.y, depthwise));
  boosters.push_back(boosting::Booster::fit(train_set.x, train_set.y, leafwise));

  const Matrix x_val = bundle.context.assemble_all(val);
  std::vector<int> y_val;
  std::vector<boosting::ContextBucket> contexts;
  for (const auto& r : val) {
    y_val.push_back(static_cast<int>(*r.severity));
    contexts.push_back(boosting::context_of(r));
  }
  auto meta = boosting::fit_meta_weights({&boosters[0], &boosters[1]}, x_val, y_val, contexts, options.meta);

  local.booster_validation_accuracy.assign(boosters.size(), 0.0);
  std::size_t ensemble_correct = 0;
  std::vector<double> margin;
  for (std::size_t i = 0; i < val.size(); ++i) {
    for (std::size_t m = 0; m < boosters.size(); ++m) {
      margin = boosters[m].predict_margin(x_val.row(i));
      if (std::max_element(margin.begin(), margin.end()) - margin.begin() == y_val[i]) {
        local.booster_validation_accuracy[m] += 1.0;
      }
    }
  }
  std::vector<std::string> names(features::feature_names().begin(), features::feature_names().end());
  bundle.ensemble =
      boosting::EnsembleModel(std::move(names), std::move(boosters), std::move(meta), std::move(background));
  for (std::size_t i = 0; i < val.size(); ++i) {
    if (bundle.ensemble.predict(x_val.row(i), contexts[i]).predicted_class == y_val[i]) ++ensemble_correct;
  }
  const double n_val = std::max<double>(1.0, static_cast<double>(val.size()));
  for (double& a : local.booster_validation_accuracy) a /= n_val;
  local.ensemble_validation_accuracy = static_cast<double>(ensemble_correct) / n_val;
  local.train_size = train.size();
  local.validation_size = val.size();
  bundle.baseline = DriftBaseline{local.ensemble_validation_accuracy, val.size()};
  local.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (report) *report = std::move(local);
  return bundle;
}

TrainOptions train_options_from(const ModelBundle& bundle) {
  TrainOptions options;
  const auto& boosters = bundle.ensemble.boosters();
  for (const auto& b : boosters) {
    if (b.config().variant == boosting::BoosterVariant::kDepthwise) {
      options.depthwise = b.config();
    } else {
      options.leafwise = b.config();
    }
  }
  options.meta = bundle.ensemble.meta().options();
  options.background_rows = bundle.ensemble.background().rows();
  if (!boosters.empty()) options.seed = boosters.front().config().seed;
  return options;
}

}  // namespace crashcast
