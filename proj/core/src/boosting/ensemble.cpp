#include "crashcast/boosting/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crashcast/error.hpp"
#include "crashcast/features/feature_vector.hpp"

namespace crashcast::boosting {

std::size_t ContextBucket::index() const {
  if (weather_category < 1 || weather_category > kWeatherCategoryCount || hour_bin < 0 || hour_bin > 5) {
    throw Error(ErrorCode::kInvalidArgument, "context bucket out of range");
  }
  return (static_cast<std::size_t>(weather_category - 1) * 6 + static_cast<std::size_t>(hour_bin)) * 2 +
         (weekend ? 1 : 0);
}

ContextBucket ContextBucket::from_index(std::size_t index) {
  if (index >= kCount) throw Error(ErrorCode::kInvalidArgument, "context bucket index out of range");
  return ContextBucket{static_cast<int>(index / 12) + 1, static_cast<int>(index / 2 % 6), index % 2 == 1};
}

ContextBucket context_at(Timestamp t, int weather_category) {
  const auto civil = to_civil(t);
  return ContextBucket{std::clamp(weather_category, 1, kWeatherCategoryCount), civil.hour / 4,
                       civil.weekday == 0 || civil.weekday == 6};
}

ContextBucket context_of(const CrashRecord& record) {
  const int weather = record.code(CodeField::kWeather1).value_or(1);
  if (record.occurred_at) return context_at(*record.occurred_at, weather);
  return ContextBucket{std::clamp(weather, 1, kWeatherCategoryCount), std::clamp(record.hour_of_day.value_or(0), 0, 23) / 4,
                       false};
}

std::vector<double> PerformanceProfile::weights() const {
  const std::size_t m = decayed_correct.size();
  std::vector<double> w(m, m ? 1.0 / static_cast<double>(m) : 0.0);
  if (decayed_total <= 0.0) return w;
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = decayed_correct[i] / decayed_total;
    w[i] = a * a;
    sum += w[i];
  }
  if (sum <= 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(m));
    return w;
  }
  for (double& x : w) x /= sum;
  return w;
}

MetaWeights::MetaWeights(std::size_t num_models, MetaOptions options) : num_models_(num_models), options_(options) {
  if (num_models == 0) throw Error(ErrorCode::kInvalidArgument, "meta weights need at least one model");
  if (!(options.decay > 0.0 && options.decay <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "decay must be in (0, 1]");
  global_.decayed_correct.assign(num_models, 0.0);
}

void MetaWeights::bump(PerformanceProfile& p, const std::vector<bool>& correct) const {
  if (p.decayed_correct.empty()) p.decayed_correct.assign(num_models_, 0.0);
  for (std::size_t m = 0; m < num_models_; ++m) {
    p.decayed_correct[m] = options_.decay * p.decayed_correct[m] + (correct[m] ? 1.0 : 0.0);
  }
  p.decayed_total = options_.decay * p.decayed_total + 1.0;
  ++p.count;
}

void MetaWeights::update(const ContextBucket& context, const std::vector<bool>& correct) {
  if (correct.size() != num_models_) throw Error(ErrorCode::kLengthMismatch, "meta update: one outcome per model");
  bump(buckets_[context.index()], correct);
  bump(global_, correct);
}

std::vector<double> MetaWeights::weights_for(const ContextBucket& context) const {
  const auto it = buckets_.find(context.index());
  if (it == buckets_.end() || it->second.count < options_.min_bucket_count) return global_.weights();
  return it->second.weights();
}

namespace {

nlohmann::json profile_json(const PerformanceProfile& p) {
  return {{"decayed_correct", p.decayed_correct}, {"decayed_total", p.decayed_total}, {"count", p.count}};
}

PerformanceProfile profile_from(const nlohmann::json& j, std::size_t m) {
  PerformanceProfile p{j.at("decayed_correct").get<std::vector<double>>(), j.at("decayed_total").get<double>(),
                       j.at("count").get<std::size_t>()};
  if (p.decayed_correct.size() != m) throw Error(ErrorCode::kMalformedDocument, "meta profile size");
  return p;
}

}  // namespace

nlohmann::json to_json(const MetaWeights& m) {
  auto buckets = nlohmann::json::array();
  for (const auto& [index, p] : m.buckets_) {
    const auto b = ContextBucket::from_index(index);
    auto entry = profile_json(p);
    entry["weather_category"] = b.weather_category;
    entry["hour_bin"] = b.hour_bin;
    entry["weekend"] = b.weekend;
    entry["weights"] = p.weights();
    buckets.push_back(std::move(entry));
  }
  auto global = profile_json(m.global_);
  global["weights"] = m.global_.weights();
  return {{"num_models", m.num_models_},
          {"decay", m.options_.decay},
          {"min_bucket_count", m.options_.min_bucket_count},
          {"global", std::move(global)},
          {"buckets", std::move(buckets)}};
}

MetaWeights meta_weights_from_json(const nlohmann::json& doc) {
  try {
    MetaWeights m(doc.at("num_models").get<std::size_t>(),
                  MetaOptions{doc.at("decay").get<double>(), doc.at("min_bucket_count").get<std::size_t>()});
    m.global_ = profile_from(doc.at("global"), m.num_models_);
    for (const auto& entry : doc.at("buckets")) {
      const ContextBucket b{entry.at("weather_category").get<int>(), entry.at("hour_bin").get<int>(),
                            entry.at("weekend").get<bool>()};
      m.buckets_[b.index()] = profile_from(entry, m.num_models_);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("meta weights: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("meta weights: ") + e.what());
  }
}

MetaWeights fit_meta_weights(const std::vector<const Booster*>& boosters, const Matrix& x, std::span<const int> labels,
                             std::span<const ContextBucket> contexts, const MetaOptions& options) {
  for (const auto* b : boosters) {
    if (b == nullptr || !b->fitted()) throw Error(ErrorCode::kUnfittedModel, "meta weights need fitted boosters");
  }
  if (labels.size() != x.rows() || contexts.size() != x.rows()) {
    throw Error(ErrorCode::kLengthMismatch, "meta weights: rows, labels and contexts differ in length");
  }
  MetaWeights meta(boosters.size(), options);
  std::vector<bool> correct(boosters.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t m = 0; m < boosters.size(); ++m) {
      const auto margin = boosters[m]->predict_margin(x.row(i));
      const auto arg = std::max_element(margin.begin(), margin.end()) - margin.begin();
      correct[m] = arg == labels[i];
    }
    meta.update(contexts[i], correct);
  }
  return meta;
}

std::string_view attribution_method_name(AttributionMethod m) noexcept {
  return m == AttributionMethod::kInterventional ? "interventional" : "path";
}

EnsembleModel::EnsembleModel(std::vector<std::string> feature_names, std::vector<Booster> boosters, MetaWeights meta,
                             Matrix background)
    : feature_names_(std::move(feature_names)),
      boosters_(std::move(boosters)),
      meta_(std::move(meta)),
      background_(std::move(background)) {
  if (!background_.empty() && background_.cols() != feature_names_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "background width differs from the feature count");
  }
  if (boosters_.empty()) throw Error(ErrorCode::kInvalidArgument, "ensemble needs at least one booster");
  for (const auto& b : boosters_) {
    if (!b.fitted()) throw Error(ErrorCode::kUnfittedModel, "ensemble member is not fitted");
    if (b.num_classes() != boosters_.front().num_classes() || b.num_features() != feature_names_.size()) {
      throw Error(ErrorCode::kInvalidArgument, "ensemble members disagree on classes or features");
    }
  }
  if (meta_.num_models() != boosters_.size()) throw Error(ErrorCode::kInvalidArgument, "meta weights size mismatch");
}

std::size_t EnsembleModel::node_count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : boosters_) n += b.node_count();
  return n;
}

EnsemblePrediction EnsembleModel::predict(std::span<const double> x, const ContextBucket& context) const {
  if (!fitted()) throw Error(ErrorCode::kUnfittedModel, "ensemble is not fitted");
  EnsemblePrediction out;
  out.weights = meta_.weights_for(context);
  out.probabilities.assign(num_classes(), 0.0);
  std::vector<double> p(num_classes());
  for (std::size_t m = 0; m < boosters_.size(); ++m) {
    boosters_[m].predict_margin(x, p);
    softmax(p);
    for (std::size_t c = 0; c < p.size(); ++c) out.probabilities[c] += out.weights[m] * p[c];
  }
  double sum = 0.0;
  for (double v : out.probabilities) sum += v;
  for (double& v : out.probabilities) v /= sum;
  const auto best = std::max_element(out.probabilities.begin(), out.probabilities.end());
  out.confidence = *best;
  out.predicted_class = static_cast<int>(best - out.probabilities.begin());
  return out;
}

std::vector<double> EnsembleModel::margin(std::span<const double> x, const ContextBucket& context) const {
  if (!fitted()) throw Error(ErrorCode::kUnfittedModel, "ensemble is not fitted");
  const auto w = meta_.weights_for(context);
  std::vector<double> out(num_classes(), 0.0), m(num_classes());
  for (std::size_t i = 0; i < boosters_.size(); ++i) {
    boosters_[i].predict_margin(x, m);
    for (std::size_t c = 0; c < m.size(); ++c) out[c] += w[i] * m[c];
  }
  return out;
}

nlohmann::json to_json(const EnsembleModel& m) {
  auto boosters = nlohmann::json::array();
  for (const auto& b : m.boosters()) boosters.push_back(to_json(b));
  auto background = nlohmann::json::array();
  for (std::size_t r = 0; r < m.background().rows(); ++r) {
    auto row = nlohmann::json::array();
    for (double v : m.background().row(r)) row.push_back(std::isnan(v) ? nlohmann::json() : nlohmann::json(v));
    background.push_back(std::move(row));
  }
  return {{"version", EnsembleModel::kVersion},
          {"feature_names", m.feature_names()},
          {"boosters", std::move(boosters)},
          {"meta", to_json(m.meta())},
          {"background", std::move(background)}};
}

EnsembleModel ensemble_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != EnsembleModel::kVersion) {
      throw Error(ErrorCode::kMalformedDocument, "ensemble: unsupported version");
    }
    std::vector<Booster> boosters;
    for (const auto& b : doc.at("boosters")) boosters.push_back(booster_from_json(b));
    Matrix background;
    if (doc.contains("background")) {
      std::vector<double> row;
      for (const auto& r : doc.at("background")) {
        row.clear();
        for (const auto& v : r) row.push_back(v.is_null() ? std::nan("") : v.get<double>());
        background.append_row(row);
      }
    }
    return EnsembleModel(doc.at("feature_names").get<std::vector<std::string>>(), std::move(boosters),
                         meta_weights_from_json(doc.at("meta")), std::move(background));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("ensemble: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedDocument) throw;
    throw Error(ErrorCode::kMalformedDocument, std::string("ensemble: ") + e.what());
  }
}

AttributionResult attribute_prediction(const EnsembleModel& model, std::span<const double> x, int cls,
                                       const ContextBucket& context, AttributionMethod method) {
  if (!model.fitted()) throw Error(ErrorCode::kUnfittedModel, "ensemble is not fitted");
  if (cls < 0 || static_cast<std::size_t>(cls) >= model.num_classes()) {
    throw Error(ErrorCode::kInvalidArgument, "class out of range");
  }
  const std::size_t d = model.feature_names().size();
  if (x.size() != d) throw Error(ErrorCode::kLengthMismatch, "attribution: feature count");
  AttributionResult out;
  out.method = model.background().empty() ? AttributionMethod::kPath : method;
  out.explained_class = cls;
  out.contributions.assign(d, 0.0);
  const auto w = model.meta().weights_for(context);
  std::vector<double> local(d);
  for (std::size_t m = 0; m < model.boosters().size(); ++m) {
    std::fill(local.begin(), local.end(), 0.0);
    double base = 0.0;
    if (out.method == AttributionMethod::kInterventional) {
      model.boosters()[m].attribute_interventional(x, static_cast<std::size_t>(cls), model.background(), base, local);
    } else {
      model.boosters()[m].attribute(x, static_cast<std::size_t>(cls), base, local);
    }
    out.base_value += w[m] * base;
    for (std::size_t f = 0; f < d; ++f) out.contributions[f] += w[m] * local[f];
  }
  out.margin = model.margin(x, context)[static_cast<std::size_t>(cls)];

  for (std::size_t g = 0; g < features::kFactorGroupCount; ++g) {
    out.grouped[std::string(features::factor_group_name(static_cast<features::FactorGroup>(g)))] = 0.0;
  }
  const auto& known = features::feature_names();
  for (std::size_t f = 0; f < d; ++f) {
    const auto it = std::find(known.begin(), known.end(), model.feature_names()[f]);
    if (it == known.end()) continue;
    const auto group = features::factor_group_of(static_cast<std::size_t>(it - known.begin()));
    out.grouped[std::string(features::factor_group_name(group))] += out.contributions[f];
  }
  return out;
}

}  // namespace crashcast::boosting
