#include "crashcast/pipeline/quality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "crashcast/record_csv.hpp"

namespace crashcast::pipeline {

namespace {

// Sorting first makes the floating-point sums independent of input order.
ControlLimit fit_limit(std::vector<double> values, double k) {
  ControlLimit lim;
  lim.k = k;
  if (values.empty()) return lim;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  lim.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - lim.mean) * (v - lim.mean);
    lim.sigma = std::sqrt(ss / (n - 1.0));
  }
  return lim;
}

struct Samples {
  std::vector<double> lat, lon, hour;
  std::size_t count = 0;
};

void add_sample(Samples& s, const CrashRecord& r) {
  ++s.count;
  if (r.location) {
    s.lat.push_back(r.location->lat());
    s.lon.push_back(r.location->lon());
  }
  if (r.hour_of_day) s.hour.push_back(*r.hour_of_day);
}

GroupLimits fit_group(const Samples& s, double k) {
  GroupLimits g;
  g.lat = fit_limit(s.lat, k);
  g.lon = fit_limit(s.lon, k);
  g.hour = fit_limit(s.hour, k);
  g.count = s.count;
  return g;
}

std::optional<int> effective_hour(const CrashRecord& r) {
  if (r.hour_of_day) return r.hour_of_day;
  if (r.occurred_at) return to_civil(*r.occurred_at).hour;
  return std::nullopt;
}

}  // namespace

IngestResult ingest_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot open " + path);
  return ingest_csv(in);
}

IngestResult ingest_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kMissingHeader, "empty input, header row required");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const ColumnMap columns(split_csv_line(line));

  IngestResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      result.records.push_back(parse_record_fields(split_csv_line(line), columns));
    } catch (const Error& e) {
      result.errors.push_back(ParseError{line_no, e.what()});
    }
  }
  if (in.bad()) throw Error(ErrorCode::kUnreadableFile, "read failure");
  return result;
}

const GroupLimits& QualityThresholds::limits_for(const std::string& group) const {
  auto it = groups.find(group);
  return it == groups.end() ? global : it->second;
}

std::string group_key(const CrashRecord& r, const std::string& group_by) {
  if (group_by.empty()) return {};
  if (group_by == "COUNTY" || group_by == "county") return r.county;
  if (auto code = code_from_name(group_by)) {
    const auto v = r.code(*code);
    return v ? std::to_string(*v) : std::string();
  }
  throw Error(ErrorCode::kInvalidArgument, "unsupported grouping field: " + group_by);
}

QualityThresholds fit_adaptive_thresholds(std::span<const CrashRecord> records, double k, const std::string& group_by,
                                          std::size_t min_group_size) {
  if (!(k > 0.0)) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  Samples all;
  std::map<std::string, Samples> per_group;
  for (const auto& r : records) {
    add_sample(all, r);
    add_sample(per_group[group_key(r, group_by)], r);
  }
  if (all.lat.empty()) throw Error(ErrorCode::kEmptyInput, "no records with a location to fit thresholds");

  QualityThresholds t;
  t.group_by = group_by;
  t.k = k;
  t.min_group_size = min_group_size;
  t.global = fit_group(all, k);
  for (const auto& [key, samples] : per_group) {
    GroupLimits g;
    if (samples.lat.size() >= min_group_size) {
      g = fit_group(samples, k);
    } else {
      g = t.global;
      g.count = samples.count;
      g.uses_global = true;
    }
    t.groups.emplace(key, g);
  }
  return t;
}

std::string_view reject_reason_name(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::kMissingCritical: return "missing_critical";
    case RejectReason::kCoordinateInconsistent: return "coordinate_inconsistent";
    case RejectReason::kSeverityAmbiguous: return "severity_ambiguous";
    case RejectReason::kControlLimitViolation: return "control_limit_violation";
  }
  return "unknown";
}

std::size_t ValidationReport::rejected_total() const {
  std::size_t total = 0;
  for (const auto& [_, n] : rejection_reasons) total += n;
  return total;
}

ValidationResult validate_batch(std::span<const CrashRecord> records, const QualityThresholds& thresholds,
                                const ValidationOptions& options) {
  ValidationResult out;
  auto& rep = out.report;
  for (std::size_t i = 0; i < kRejectReasonCount; ++i) {
    rep.rejection_reasons[std::string(reject_reason_name(static_cast<RejectReason>(i)))] = 0;
  }
  auto reject = [&](RejectReason r) { ++rep.rejection_reasons[std::string(reject_reason_name(r))]; };

  for (const auto& r : records) {
    ++rep.input_count;
    if (!r.location || !r.occurred_at) {
      reject(RejectReason::kMissingCritical);
      continue;
    }
    if (!r.severity) {
      reject(RejectReason::kSeverityAmbiguous);
      continue;
    }
    const GroupLimits& lim = thresholds.limits_for(group_key(r, thresholds.group_by));
    if (!options.region.contains(*r.location) || !lim.lat.admits(r.location->lat()) ||
        !lim.lon.admits(r.location->lon())) {
      reject(RejectReason::kCoordinateInconsistent);
      continue;
    }
    if (const auto h = effective_hour(r); h && !lim.hour.admits(*h)) {
      reject(RejectReason::kControlLimitViolation);
      continue;
    }
    out.retained.push_back(r);
  }
  rep.retained_count = out.retained.size();
  rep.retention_rate =
      rep.input_count == 0 ? 1.0 : static_cast<double>(rep.retained_count) / static_cast<double>(rep.input_count);
  return out;
}

std::vector<Flag> behavioral_flags() {
  return {Flag::kAlcoholRelated, Flag::kDruggedDriver, Flag::kMarijuanaRelated, Flag::kCellPhone,
          Flag::kDistracted,     Flag::kFatigueAsleep, Flag::kAggressiveDriving, Flag::kUnbelted};
}

double missing_critical_fraction(const CrashRecord& r) {
  const auto flags = behavioral_flags();
  std::size_t missing = 0;
  missing += r.location ? 0 : 1;
  missing += r.occurred_at ? 0 : 1;
  missing += r.severity ? 0 : 1;
  for (Flag f : flags) missing += r.flag(f) ? 0 : 1;
  return static_cast<double>(missing) / static_cast<double>(3 + flags.size());
}

MissingnessPartition exclude_high_missingness(std::span<const CrashRecord> records, double threshold) {
  MissingnessPartition p;
  for (const auto& r : records) {
    if (missing_critical_fraction(r) > threshold) p.robustness_holdout.push_back(r);
    else p.training.push_back(r);
  }
  return p;
}

nlohmann::json to_json(const ValidationReport& report) {
  return {{"input_count", report.input_count},
          {"retained_count", report.retained_count},
          {"rejection_reasons", report.rejection_reasons},
          {"retention_rate", report.retention_rate}};
}

}  // namespace crashcast::pipeline
