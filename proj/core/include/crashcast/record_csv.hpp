#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crashcast/record.hpp"

namespace crashcast {

// Fixed columns preceding the per-flag and per-code columns.
inline constexpr std::array<std::string_view, 8> kFixedColumns = {
    "ID", "DEC_LAT", "DEC_LONG", "CRASH_DATETIME", "HOUR_OF_DAY", "CRASH_MONTH", "SEVERITY", "COUNTY"};

std::vector<std::string> canonical_header();

// Splits one CSV line; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

// Maps canonical column -> position in a concrete header. Matching is
// case-insensitive and order-insensitive; throws kMissingHeader listing the
// absent columns.
class ColumnMap {
 public:
  explicit ColumnMap(const std::vector<std::string>& header);
  std::size_t position(std::size_t canonical_index) const { return positions_[canonical_index]; }
  std::size_t width() const noexcept { return width_; }

 private:
  std::vector<std::size_t> positions_;
  std::size_t width_ = 0;
};

// Throws Error (kOutOfRangeSeverity, kInvalidCoordinate, kInvalidArgument) on a
// malformed row.
CrashRecord parse_record_fields(const std::vector<std::string>& fields, const ColumnMap& columns);

std::string to_csv_row(const CrashRecord& record);
void write_records_csv(std::ostream& out, std::span<const CrashRecord> records);
void write_records_csv(const std::string& path, std::span<const CrashRecord> records);

}  // namespace crashcast
