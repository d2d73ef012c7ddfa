#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/record.hpp"

namespace crashcast::pipeline {

// Dense row-major numeric table with an explicit observed mask. Unobserved
// cells hold NaN until imputed.
class NumericTable {
 public:
  NumericTable() = default;
  NumericTable(std::vector<std::string> columns, std::size_t rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return columns_.size(); }
  const std::vector<std::string>& columns() const noexcept { return columns_; }

  double value(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  bool observed(std::size_t r, std::size_t c) const { return observed_[r * cols() + c] != 0; }
  void set(std::size_t r, std::size_t c, double v);  // marks observed
  void set_missing(std::size_t r, std::size_t c);
  void fill(std::size_t r, std::size_t c, double v) { values_[r * cols() + c] = v; }  // keeps the mask

  std::size_t observed_count(std::size_t c) const;
  bool operator==(const NumericTable&) const = default;

 private:
  std::vector<std::string> columns_;
  std::size_t rows_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> observed_;
};

struct MiceOptions {
  std::size_t max_iter = 10;
  double tol = 1e-3;
  double ridge_lambda = 1e-6;
};

struct LinearModel {
  std::string target;
  std::vector<std::string> predictors;
  std::vector<double> coefficients;
  double intercept = 0.0;
};

struct ImputationModel {
  std::vector<LinearModel> numeric_models;
  double ridge_lambda = 1e-6;
  // field -> context key -> (code -> probability)
  std::map<std::string, std::map<std::string, std::map<int, double>>> categorical_tables;
  std::size_t iteration_count = 0;
  bool converged = false;
};

struct MiceResult {
  NumericTable completed;  // observed mask preserved from the input
  ImputationModel model;
};

// Chained ridge regressions, one per column with missing cells, initialised
// from column means and iterated until the largest per-cell change falls
// below `tol` or `max_iter` passes ran. Observed cells are never written.
MiceResult impute_mice(const NumericTable& table, const MiceOptions& options = {});

// Column means over observed cells; the baseline for masked comparisons.
NumericTable impute_column_means(const NumericTable& table);

// Record adapter: DEC_LAT, DEC_LONG, HOUR_OF_DAY, CRASH_MONTH. Hour and month
// are first derived from occurred_at when present; imputed values are rounded
// and clamped to their domains.
std::vector<std::string> record_numeric_columns();
NumericTable numeric_table_from_records(std::span<const CrashRecord> records);
std::vector<CrashRecord> impute_numeric_mice(std::span<const CrashRecord> records, const MiceOptions& options = {},
                                             ImputationModel* model_out = nullptr);

// Hour-of-day context bucket: six 4-hour bins.
inline int hour_bucket(int hour) { return hour / 4; }

// Conditional-mode imputation for every code field and every flag. Context
// chain: (hour bucket, county) -> county -> global. Ties go to the smallest
// code. Throws kNoObservedValues when a missing cell belongs to a field with no
// observed value at all.
class CategoricalImputer {
 public:
  static CategoricalImputer fit(std::span<const CrashRecord> records);

  std::vector<CrashRecord> apply(std::span<const CrashRecord> records) const;
  // Mode for one field under a record's context, following the fallback chain.
  int impute_value(const std::string& field, const CrashRecord& context) const;

  // Probability tables (each row sums to 1).
  std::map<std::string, std::map<std::string, std::map<int, double>>> tables() const;

 private:
  using Counts = std::map<int, std::size_t>;
  struct FieldTables {
    std::map<std::pair<int, std::string>, Counts> by_bucket_county;
    std::map<std::string, Counts> by_county;
    Counts global;
  };
  std::map<std::string, FieldTables> fields_;
};

std::vector<CrashRecord> impute_categorical_conditional(std::span<const CrashRecord> records);

struct MaskedEvalReport {
  double categorical_accuracy = 0.0;
  double numeric_mae = 0.0;
  double masked_fraction = 0.0;
  std::size_t categorical_masked = 0;
  std::size_t numeric_masked = 0;
};

nlohmann::json to_json(const MaskedEvalReport& report);

// Masks `mask_fraction` of the known categorical cells (codes and flags) and of
// the known numeric cells, imputes, and scores only the masked cells. Numeric
// errors are measured in units of each column's observed standard deviation.
MaskedEvalReport masked_imputation_eval(std::span<const CrashRecord> records, double mask_fraction,
                                        std::uint64_t seed, const MiceOptions& options = {});

using NumericImputer = std::function<NumericTable(const NumericTable&)>;

// Masked mean absolute error (raw units) of an arbitrary numeric imputer.
double masked_numeric_mae(const NumericTable& table, double mask_fraction, std::uint64_t seed,
                          const NumericImputer& imputer);

}  // namespace crashcast::pipeline
