#include "crashcast/service/crash_store.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

#include <zlib.h>

#include "crashcast/error.hpp"
#include "crashcast/record_csv.hpp"

namespace crashcast::service {

namespace {

std::uint32_t checksum(std::string_view text) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
}

const ColumnMap& canonical_columns() {
  static const ColumnMap columns(canonical_header());
  return columns;
}

std::string sql_text(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

}  // namespace

std::string log_line(const CrashRecord& record) {
  const std::string row = to_csv_row(record);
  char crc[9];
  std::snprintf(crc, sizeof(crc), "%08x", checksum(row));
  return std::string(crc) + '\t' + row;
}

CrashRecord parse_log_line(const std::string& line) {
  const auto tab = line.find('\t');
  if (tab != 8) throw Error(ErrorCode::kCorruptLog, "missing checksum");
  const std::string_view row(line.data() + 9, line.size() - 9);
  unsigned long expected = 0;
  try {
    std::size_t used = 0;
    expected = std::stoul(line.substr(0, 8), &used, 16);
    if (used != 8) throw std::invalid_argument("checksum");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kCorruptLog, "unreadable checksum");
  }
  if (checksum(row) != expected) throw Error(ErrorCode::kCorruptLog, "checksum mismatch");
  try {
    return parse_record_fields(split_csv_line(row), canonical_columns());
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorruptLog, e.what());
  }
}

CrashStore::CrashStore(std::string directory, CrashStoreOptions options)
    : directory_(std::move(directory)), options_(options) {
  if (directory_.empty()) return;
  std::filesystem::create_directories(directory_);
  const auto path = std::filesystem::path(directory_) / kLogName;
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records_.push_back(parse_log_line(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kCorruptLog, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    index_record(records_.size() - 1);
  }
}

void CrashStore::index_record(std::size_t position) {
  const auto& r = records_[position];
  index_[cell_of(*r.location, options_.index_resolution).key()].push_back(position);
}

void CrashStore::insert(std::span<const CrashRecord> records) {
  for (const auto& r : records) {
    if (!r.location) throw Error(ErrorCode::kInvalidArgument, "record " + r.id + " has no location");
  }
  std::unique_lock lock(mutex_);
  if (records_.size() + records.size() > options_.max_records) {
    throw Error(ErrorCode::kStorageFull, "crash store holds at most " + std::to_string(options_.max_records) + " records");
  }
  if (!directory_.empty()) {
    std::string block;
    for (const auto& r : records) block += log_line(r) + '\n';
    std::ofstream out(std::filesystem::path(directory_) / kLogName, std::ios::app | std::ios::binary);
    out << block;
    out.flush();
    if (!out) throw Error(ErrorCode::kStorageFull, "cannot append to the crash log");
  }
  for (const auto& r : records) {
    records_.push_back(r);
    index_record(records_.size() - 1);
  }
}

std::vector<CrashRecord> CrashStore::query(const BoundingBox& box, std::optional<Timestamp> from,
                                           std::optional<Timestamp> to) const {
  if (!box.valid()) throw Error(ErrorCode::kInvalidArgument, "invalid bounding box");
  const auto keep = [&](const CrashRecord& r) {
    if (!box.contains(*r.location)) return false;
    if (!from && !to) return true;
    if (!r.occurred_at) return false;
    return (!from || *r.occurred_at >= *from) && (!to || *r.occurred_at < *to);
  };
  std::shared_lock lock(mutex_);
  std::vector<std::size_t> hits;
  const int res = options_.index_resolution;
  const CellId lo = cell_of(GeoPoint(box.min_lat, box.min_lon), res);
  const CellId hi = cell_of(GeoPoint(box.max_lat, box.max_lon), res);
  const std::uint64_t span_cells = static_cast<std::uint64_t>(hi.row - lo.row + 1) * (hi.col - lo.col + 1);
  if (span_cells > index_.size()) {
    for (const auto& [key, members] : index_) {
      if (!box.intersects(CellId::from_key(key))) continue;
      for (std::size_t i : members) {
        if (keep(records_[i])) hits.push_back(i);
      }
    }
  } else {
    for (std::uint32_t row = lo.row; row <= hi.row; ++row) {
      for (std::uint32_t col = lo.col; col <= hi.col; ++col) {
        const auto it = index_.find(CellId{res, row, col}.key());
        if (it == index_.end()) continue;
        for (std::size_t i : it->second) {
          if (keep(records_[i])) hits.push_back(i);
        }
      }
    }
  }
  std::sort(hits.begin(), hits.end());
  std::vector<CrashRecord> out;
  out.reserve(hits.size());
  for (std::size_t i : hits) out.push_back(records_[i]);
  return out;
}

std::vector<CellId> CrashStore::active_cells(int resolution) const {
  std::shared_lock lock(mutex_);
  std::set<CellId> cells;
  for (const auto& r : records_) cells.insert(cell_of(*r.location, resolution));
  return {cells.begin(), cells.end()};
}

std::vector<CrashRecord> CrashStore::all() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::size_t CrashStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

void CrashStore::export_sql(std::ostream& out) const {
  out << "CREATE TABLE crashes (\n"
         "  id SERIAL PRIMARY KEY,\n"
         "  source_id VARCHAR(64),\n"
         "  location GEOMETRY(Point, 4326),\n"
         "  crash_datetime TIMESTAMPTZ,\n"
         "  severity INTEGER,\n"
         "  weather_condition VARCHAR(50),\n"
         "  road_condition VARCHAR(50)\n"
         ");\n"
         "CREATE INDEX idx_crashes_location ON crashes USING GIST (location);\n"
         "CREATE INDEX idx_crashes_datetime ON crashes (crash_datetime);\n";
  std::shared_lock lock(mutex_);
  for (const auto& r : records_) {
    const auto weather = r.code(CodeField::kWeather1);
    const auto road = r.code(CodeField::kRoadCondition);
    out << "INSERT INTO crashes (source_id, location, crash_datetime, severity, weather_condition, road_condition) "
           "VALUES ("
        << sql_text(r.id) << ", ST_SetSRID(ST_MakePoint(" << format_double(r.location->lon()) << ", "
        << format_double(r.location->lat()) << "), 4326), "
        << (r.occurred_at ? sql_text(format_iso8601(*r.occurred_at)) : "NULL") << ", "
        << (r.severity ? std::to_string(static_cast<int>(*r.severity)) : "NULL") << ", "
        << (weather ? sql_text(weather_category_name(*weather)) : "NULL") << ", "
        << (road ? sql_text(std::to_string(*road)) : "NULL") << ");\n";
  }
}

}  // namespace crashcast::service
