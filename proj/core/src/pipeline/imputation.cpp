#include "crashcast/pipeline/imputation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace crashcast::pipeline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::optional<int> effective_hour(const CrashRecord& r) {
  if (r.hour_of_day) return r.hour_of_day;
  if (r.occurred_at) return to_civil(*r.occurred_at).hour;
  return std::nullopt;
}

std::vector<std::string> categorical_fields() {
  std::vector<std::string> f;
  for (std::size_t i = 0; i < kCodeCount; ++i) f.emplace_back(code_name(static_cast<CodeField>(i)));
  for (std::size_t i = 0; i < kFlagCount; ++i) f.emplace_back(flag_name(static_cast<Flag>(i)));
  return f;
}

std::optional<int> get_categorical(const CrashRecord& r, std::size_t field) {
  if (field < kCodeCount) return r.codes[field];
  const auto& f = r.flags[field - kCodeCount];
  if (!f) return std::nullopt;
  return *f ? 1 : 0;
}

void set_categorical(CrashRecord& r, std::size_t field, std::optional<int> v) {
  if (field < kCodeCount) {
    r.codes[field] = v;
  } else {
    r.flags[field - kCodeCount] = v ? std::optional<bool>(*v != 0) : std::nullopt;
  }
}

int mode_of(const std::map<int, std::size_t>& counts) {
  int best = counts.begin()->first;
  std::size_t best_n = 0;
  for (const auto& [code, n] : counts) {  // ascending code order: first maximum wins ties
    if (n > best_n) {
      best = code;
      best_n = n;
    }
  }
  return best;
}

std::map<int, double> normalize(const std::map<int, std::size_t>& counts) {
  double total = 0.0;
  for (const auto& [_, n] : counts) total += static_cast<double>(n);
  std::map<int, double> p;
  for (const auto& [c, n] : counts) p[c] = static_cast<double>(n) / total;
  return p;
}

}  // namespace

NumericTable::NumericTable(std::vector<std::string> columns, std::size_t rows)
    : columns_(std::move(columns)),
      rows_(rows),
      values_(rows * columns_.size(), kNaN),
      observed_(rows * columns_.size(), 0) {}

void NumericTable::set(std::size_t r, std::size_t c, double v) {
  values_[r * cols() + c] = v;
  observed_[r * cols() + c] = 1;
}

void NumericTable::set_missing(std::size_t r, std::size_t c) {
  values_[r * cols() + c] = kNaN;
  observed_[r * cols() + c] = 0;
}

std::size_t NumericTable::observed_count(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows_; ++r) n += observed(r, c) ? 1 : 0;
  return n;
}

NumericTable impute_column_means(const NumericTable& table) {
  NumericTable out = table;
  for (std::size_t c = 0; c < table.cols(); ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (table.observed(r, c)) {
        sum += table.value(r, c);
        ++n;
      }
    }
    if (n == 0) throw Error(ErrorCode::kAllMissingFeature, "column " + table.columns()[c] + " has no observed value");
    const double mean = sum / static_cast<double>(n);
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (!table.observed(r, c)) out.fill(r, c, mean);
    }
  }
  return out;
}

MiceResult impute_mice(const NumericTable& table, const MiceOptions& options) {
  if (options.max_iter == 0) throw Error(ErrorCode::kInvalidArgument, "max_iter must be >= 1");
  MiceResult result{impute_column_means(table), {}};
  NumericTable& cur = result.completed;
  ImputationModel& model = result.model;
  model.ridge_lambda = options.ridge_lambda;

  const std::size_t p = table.cols();
  std::vector<std::size_t> targets;
  for (std::size_t c = 0; c < p; ++c) {
    if (table.observed_count(c) < table.rows()) targets.push_back(c);
  }
  if (targets.empty()) {
    model.iteration_count = 1;
    model.converged = true;
    return result;
  }

  for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
    double max_change = 0.0;
    model.numeric_models.clear();
    for (std::size_t target : targets) {
      std::vector<std::size_t> preds;
      for (std::size_t c = 0; c < p; ++c) {
        if (c != target) preds.push_back(c);
      }
      std::vector<std::size_t> obs_rows, miss_rows;
      for (std::size_t r = 0; r < table.rows(); ++r) (table.observed(r, target) ? obs_rows : miss_rows).push_back(r);

      const auto n = static_cast<Eigen::Index>(obs_rows.size());
      const auto k = static_cast<Eigen::Index>(preds.size());
      Eigen::MatrixXd X(n, k);
      Eigen::VectorXd y(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) X(i, j) = cur.value(obs_rows[i], preds[j]);
        y(i) = cur.value(obs_rows[i], target);
      }
      const Eigen::RowVectorXd x_mean = X.colwise().mean();
      const double y_mean = y.mean();
      Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
      if (k > 0) {
        const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
        const Eigen::VectorXd yc = y.array() - y_mean;
        Eigen::MatrixXd gram = Xc.transpose() * Xc;
        gram.diagonal().array() += options.ridge_lambda;
        beta = gram.ldlt().solve(Xc.transpose() * yc);
      }
      const double intercept = y_mean - (k > 0 ? (x_mean * beta)(0) : 0.0);

      LinearModel lm;
      lm.target = table.columns()[target];
      for (auto c : preds) lm.predictors.push_back(table.columns()[c]);
      lm.coefficients.assign(beta.data(), beta.data() + k);
      lm.intercept = intercept;
      model.numeric_models.push_back(std::move(lm));

      for (std::size_t r : miss_rows) {
        double v = intercept;
        for (Eigen::Index j = 0; j < k; ++j) v += beta(j) * cur.value(r, preds[j]);
        max_change = std::max(max_change, std::abs(v - cur.value(r, target)));
        cur.fill(r, target, v);
      }
    }
    model.iteration_count = iter;
    if (max_change < options.tol) {
      model.converged = true;
      break;
    }
  }
  return result;
}

std::vector<std::string> record_numeric_columns() { return {"DEC_LAT", "DEC_LONG", "HOUR_OF_DAY", "CRASH_MONTH"}; }

NumericTable numeric_table_from_records(std::span<const CrashRecord> records) {
  NumericTable t(record_numeric_columns(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.location) {
      t.set(i, 0, r.location->lat());
      t.set(i, 1, r.location->lon());
    }
    std::optional<int> hour = r.hour_of_day;
    std::optional<int> month = r.crash_month;
    if (r.occurred_at) {
      const CivilTime c = to_civil(*r.occurred_at);
      if (!hour) hour = c.hour;
      if (!month) month = c.month;
    }
    if (hour) t.set(i, 2, *hour);
    if (month) t.set(i, 3, *month);
  }
  return t;
}

std::vector<CrashRecord> impute_numeric_mice(std::span<const CrashRecord> records, const MiceOptions& options,
                                             ImputationModel* model_out) {
  const NumericTable table = numeric_table_from_records(records);
  MiceResult res = impute_mice(table, options);
  std::vector<CrashRecord> out(records.begin(), records.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& r = out[i];
    if (!r.location) {
      const double lat = std::clamp(res.completed.value(i, 0), -90.0, 90.0);
      const double lon = std::clamp(res.completed.value(i, 1), -180.0, 180.0);
      r.location = GeoPoint(lat, lon);
    }
    if (!r.hour_of_day) r.hour_of_day = std::clamp(static_cast<int>(std::lround(res.completed.value(i, 2))), 0, 23);
    if (!r.crash_month) r.crash_month = std::clamp(static_cast<int>(std::lround(res.completed.value(i, 3))), 1, 12);
  }
  if (model_out) *model_out = std::move(res.model);
  return out;
}

CategoricalImputer CategoricalImputer::fit(std::span<const CrashRecord> records) {
  CategoricalImputer imp;
  const auto names = categorical_fields();
  for (std::size_t f = 0; f < names.size(); ++f) {
    FieldTables& t = imp.fields_[names[f]];
    for (const auto& r : records) {
      const auto v = get_categorical(r, f);
      if (!v) continue;
      ++t.global[*v];
      ++t.by_county[r.county][*v];
      if (const auto h = effective_hour(r)) ++t.by_bucket_county[{hour_bucket(*h), r.county}][*v];
    }
  }
  return imp;
}

int CategoricalImputer::impute_value(const std::string& field, const CrashRecord& context) const {
  auto fit = fields_.find(field);
  if (fit == fields_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown categorical field " + field);
  const FieldTables& t = fit->second;
  if (t.global.empty()) throw Error(ErrorCode::kNoObservedValues, "no observed values for " + field);
  if (const auto h = effective_hour(context)) {
    auto it = t.by_bucket_county.find({hour_bucket(*h), context.county});
    if (it != t.by_bucket_county.end()) return mode_of(it->second);
  }
  if (auto it = t.by_county.find(context.county); it != t.by_county.end()) return mode_of(it->second);
  return mode_of(t.global);
}

std::vector<CrashRecord> CategoricalImputer::apply(std::span<const CrashRecord> records) const {
  const auto names = categorical_fields();
  std::vector<CrashRecord> out(records.begin(), records.end());
  for (auto& r : out) {
    for (std::size_t f = 0; f < names.size(); ++f) {
      if (!get_categorical(r, f)) set_categorical(r, f, impute_value(names[f], r));
    }
  }
  return out;
}

std::map<std::string, std::map<std::string, std::map<int, double>>> CategoricalImputer::tables() const {
  std::map<std::string, std::map<std::string, std::map<int, double>>> out;
  for (const auto& [field, t] : fields_) {
    if (t.global.empty()) continue;
    auto& dst = out[field];
    dst["global"] = normalize(t.global);
    for (const auto& [county, counts] : t.by_county) dst["county=" + county] = normalize(counts);
    for (const auto& [key, counts] : t.by_bucket_county) {
      dst["bucket=" + std::to_string(key.first) + "|county=" + key.second] = normalize(counts);
    }
  }
  return out;
}

std::vector<CrashRecord> impute_categorical_conditional(std::span<const CrashRecord> records) {
  return CategoricalImputer::fit(records).apply(records);
}

double masked_numeric_mae(const NumericTable& table, double mask_fraction, std::uint64_t seed,
                          const NumericImputer& imputer) {
  std::vector<std::pair<std::size_t, std::size_t>> known;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      if (table.observed(r, c)) known.emplace_back(r, c);
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(known.begin(), known.end(), rng);
  known.resize(static_cast<std::size_t>(std::llround(mask_fraction * static_cast<double>(known.size()))));
  NumericTable masked = table;
  for (auto [r, c] : known) masked.set_missing(r, c);
  const NumericTable filled = imputer(masked);
  double err = 0.0;
  for (auto [r, c] : known) err += std::abs(filled.value(r, c) - table.value(r, c));
  return known.empty() ? 0.0 : err / static_cast<double>(known.size());
}

MaskedEvalReport masked_imputation_eval(std::span<const CrashRecord> records, double mask_fraction,
                                        std::uint64_t seed, const MiceOptions& options) {
  if (!(mask_fraction > 0.0 && mask_fraction <= 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "mask_fraction must be in (0, 0.5]");
  }
  std::mt19937_64 rng(seed);
  MaskedEvalReport rep;

  // Categorical cells.
  const std::size_t n_fields = kCodeCount + kFlagCount;
  std::vector<std::pair<std::size_t, std::size_t>> cat_known;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t f = 0; f < n_fields; ++f) {
      if (get_categorical(records[i], f)) cat_known.emplace_back(i, f);
    }
  }
  const std::size_t cat_total = cat_known.size();
  std::shuffle(cat_known.begin(), cat_known.end(), rng);
  cat_known.resize(static_cast<std::size_t>(std::llround(mask_fraction * static_cast<double>(cat_known.size()))));
  std::vector<CrashRecord> masked(records.begin(), records.end());
  for (auto [i, f] : cat_known) set_categorical(masked[i], f, std::nullopt);
  const auto imputed = CategoricalImputer::fit(masked).apply(masked);
  std::size_t correct = 0;
  for (auto [i, f] : cat_known) correct += get_categorical(imputed[i], f) == get_categorical(records[i], f) ? 1 : 0;
  rep.categorical_masked = cat_known.size();
  rep.categorical_accuracy =
      cat_known.empty() ? 1.0 : static_cast<double>(correct) / static_cast<double>(cat_known.size());

  // Numeric cells.
  const NumericTable table = numeric_table_from_records(records);
  std::vector<double> scale(table.cols(), 1.0);
  for (std::size_t c = 0; c < table.cols(); ++c) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (!table.observed(r, c)) continue;
      sum += table.value(r, c);
      sq += table.value(r, c) * table.value(r, c);
      ++n;
    }
    if (n > 1) {
      const double mean = sum / static_cast<double>(n);
      const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
      if (var > 0.0) scale[c] = std::sqrt(var);
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> num_known;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      if (table.observed(r, c)) num_known.emplace_back(r, c);
    }
  }
  const std::size_t num_total = num_known.size();
  std::shuffle(num_known.begin(), num_known.end(), rng);
  num_known.resize(static_cast<std::size_t>(std::llround(mask_fraction * static_cast<double>(num_known.size()))));
  NumericTable num_masked = table;
  for (auto [r, c] : num_known) num_masked.set_missing(r, c);
  const NumericTable filled = impute_mice(num_masked, options).completed;
  double err = 0.0;
  for (auto [r, c] : num_known) err += std::abs(filled.value(r, c) - table.value(r, c)) / scale[c];
  rep.numeric_masked = num_known.size();
  rep.numeric_mae = num_known.empty() ? 0.0 : err / static_cast<double>(num_known.size());

  const std::size_t total_known = cat_total + num_total;
  rep.masked_fraction = total_known > 0 ? static_cast<double>(rep.categorical_masked + rep.numeric_masked) /
                                              static_cast<double>(total_known)
                                        : 0.0;
  return rep;
}

nlohmann::json to_json(const MaskedEvalReport& report) {
  return {{"categorical_accuracy", report.categorical_accuracy},
          {"numeric_mae", report.numeric_mae},
          {"masked_fraction", report.masked_fraction},
          {"categorical_masked", report.categorical_masked},
          {"numeric_masked", report.numeric_masked}};
}

}  // namespace crashcast::pipeline
