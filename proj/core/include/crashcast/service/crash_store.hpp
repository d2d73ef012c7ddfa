#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "crashcast/cell_index.hpp"
#include "crashcast/record.hpp"

namespace crashcast::service {

struct CrashStoreOptions {
  std::size_t max_records = 5'000'000;
  int index_resolution = 8;
};

// Append-only crash log plus an in-memory grid index rebuilt on open. Each log
// line is "<crc32 hex>\t<canonical CSV row>". Safe for concurrent readers and
// writers.
class CrashStore {
 public:
  static constexpr std::string_view kLogName = "crashes.log";

  // In-memory store when `directory` is empty. Opening an existing log replays
  // it and throws kCorruptLog naming the first bad line.
  explicit CrashStore(std::string directory = {}, CrashStoreOptions options = {});

  CrashStore(const CrashStore&) = delete;
  CrashStore& operator=(const CrashStore&) = delete;

  // All-or-nothing. Every record needs a location; throws kInvalidArgument
  // otherwise and kStorageFull past max_records.
  void insert(std::span<const CrashRecord> records);

  // Records inside the box (edges inclusive) with from <= occurred_at < to.
  // With a time bound, records lacking occurred_at are excluded.
  std::vector<CrashRecord> query(const BoundingBox& box, std::optional<Timestamp> from = std::nullopt,
                                 std::optional<Timestamp> to = std::nullopt) const;

  // Distinct cells holding at least one record, sorted.
  std::vector<CellId> active_cells(int resolution) const;
  std::vector<CrashRecord> all() const;
  std::size_t size() const;
  const std::string& directory() const noexcept { return directory_; }

  // PostGIS-style DDL plus one INSERT per record.
  void export_sql(std::ostream& out) const;

 private:
  void index_record(std::size_t position);

  std::string directory_;
  CrashStoreOptions options_;
  mutable std::shared_mutex mutex_;
  std::vector<CrashRecord> records_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> index_;
};

std::string log_line(const CrashRecord& record);
// Throws kCorruptLog on a checksum or parse failure.
CrashRecord parse_log_line(const std::string& line);

}  // namespace crashcast::service
