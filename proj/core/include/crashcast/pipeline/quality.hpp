#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcast/cell_index.hpp"
#include "crashcast/record.hpp"

namespace crashcast::pipeline {

struct ParseError {
  std::size_t line = 0;  // 1-based line number in the source file (header is line 1)
  std::string message;
};

struct IngestResult {
  std::vector<CrashRecord> records;
  std::vector<ParseError> errors;
};

// Malformed rows are reported with their line number and never dropped
// silently. Throws kUnreadableFile / kMissingHeader.
IngestResult ingest_csv(const std::string& path);
IngestResult ingest_csv(std::istream& in);

struct ControlLimit {
  double mean = 0.0;
  double sigma = 0.0;
  double k = 3.0;

  double lower() const noexcept { return mean - k * sigma; }
  double upper() const noexcept { return mean + k * sigma; }
  bool admits(double v) const noexcept { return v >= lower() && v <= upper(); }
};

struct GroupLimits {
  ControlLimit lat;
  ControlLimit lon;
  ControlLimit hour;
  std::size_t count = 0;
  bool uses_global = false;  // group too small; limits copied from the global fit
};

struct QualityThresholds {
  std::string group_by = "COUNTY";
  double k = 3.0;
  std::size_t min_group_size = 30;
  GroupLimits global;
  std::map<std::string, GroupLimits> groups;

  const GroupLimits& limits_for(const std::string& group) const;
};

// Group key for a record under a grouping field ("COUNTY", a code column, or
// "" for a single global group).
std::string group_key(const CrashRecord& r, const std::string& group_by);

// Per-group mean +- k*sigma limits for latitude, longitude and hour. Groups with
// fewer than `min_group_size` records fall back to the global limits. Results
// do not depend on input order.
QualityThresholds fit_adaptive_thresholds(std::span<const CrashRecord> records, double k = 3.0,
                                          const std::string& group_by = "COUNTY", std::size_t min_group_size = 30);

enum class RejectReason { kMissingCritical, kCoordinateInconsistent, kSeverityAmbiguous, kControlLimitViolation };
inline constexpr std::size_t kRejectReasonCount = 4;
std::string_view reject_reason_name(RejectReason r) noexcept;

struct ValidationReport {
  std::size_t input_count = 0;
  std::size_t retained_count = 0;
  std::map<std::string, std::size_t> rejection_reasons;  // every reason present, zero when unused
  double retention_rate = 0.0;

  std::size_t rejected_total() const;
};

nlohmann::json to_json(const ValidationReport& report);

struct ValidationOptions {
  BoundingBox region{39.5, -80.6, 42.5, -74.6};
};

struct ValidationResult {
  std::vector<CrashRecord> retained;
  ValidationReport report;
};

// Never throws on bad records: every failure is tallied under one reason.
ValidationResult validate_batch(std::span<const CrashRecord> records, const QualityThresholds& thresholds,
                                const ValidationOptions& options = {});

// Fields counted by the missing-critical rule: location, occurred_at, severity
// and the behavioral flags.
std::vector<Flag> behavioral_flags();
double missing_critical_fraction(const CrashRecord& r);

struct MissingnessPartition {
  std::vector<CrashRecord> training;
  std::vector<CrashRecord> robustness_holdout;
};

// Records whose missing-critical fraction strictly exceeds `threshold` go to
// the robustness hold-out.
MissingnessPartition exclude_high_missingness(std::span<const CrashRecord> records, double threshold = 0.30);

}  // namespace crashcast::pipeline
