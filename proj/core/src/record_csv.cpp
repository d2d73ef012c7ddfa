#include "crashcast/record_csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

namespace crashcast {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_int_field(std::string_view text, std::string_view column) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(column) + ": not an integer '" + std::string(text) + "'");
  }
  return v;
}

double parse_double_field(std::string_view text, std::string_view column) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(column) + ": not a number '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

std::vector<std::string> canonical_header() {
  std::vector<std::string> h(kFixedColumns.begin(), kFixedColumns.end());
  for (std::size_t i = 0; i < kFlagCount; ++i) h.emplace_back(flag_name(static_cast<Flag>(i)));
  for (std::size_t i = 0; i < kCodeCount; ++i) h.emplace_back(code_name(static_cast<CodeField>(i)));
  return h;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ColumnMap::ColumnMap(const std::vector<std::string>& header) : width_(header.size()) {
  const auto canon = canonical_header();
  positions_.assign(canon.size(), 0);
  std::string missing;
  for (std::size_t c = 0; c < canon.size(); ++c) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return upper(trim(h)) == canon[c]; });
    if (it == header.end()) {
      if (!missing.empty()) missing += ",";
      missing += canon[c];
    } else {
      positions_[c] = static_cast<std::size_t>(it - header.begin());
    }
  }
  if (!missing.empty()) throw Error(ErrorCode::kMissingHeader, "missing columns: " + missing);
}

CrashRecord parse_record_fields(const std::vector<std::string>& fields, const ColumnMap& columns) {
  if (fields.size() != columns.width()) {
    throw Error(ErrorCode::kInvalidArgument, "expected " + std::to_string(columns.width()) + " fields, got " +
                                                 std::to_string(fields.size()));
  }
  auto field = [&](std::size_t canonical) { return trim(fields[columns.position(canonical)]); };

  CrashRecord r;
  r.id = std::string(field(0));
  if (r.id.empty()) throw Error(ErrorCode::kInvalidArgument, "ID is empty");

  const auto lat_text = field(1);
  const auto lon_text = field(2);
  if (!lat_text.empty() && !lon_text.empty()) {
    r.location = GeoPoint(parse_double_field(lat_text, "DEC_LAT"), parse_double_field(lon_text, "DEC_LONG"));
  }

  if (const auto t = field(3); !t.empty()) {
    r.occurred_at = parse_iso8601(t);
    if (!r.occurred_at) throw Error(ErrorCode::kInvalidArgument, "CRASH_DATETIME: bad timestamp");
  }
  if (const auto t = field(4); !t.empty()) {
    const int h = parse_int_field(t, "HOUR_OF_DAY");
    if (h < 0 || h > 23) throw Error(ErrorCode::kInvalidArgument, "HOUR_OF_DAY out of range");
    r.hour_of_day = h;
  }
  if (const auto t = field(5); !t.empty()) {
    const int m = parse_int_field(t, "CRASH_MONTH");
    if (m < 1 || m > 12) throw Error(ErrorCode::kInvalidArgument, "CRASH_MONTH out of range");
    r.crash_month = m;
  }
  if (const auto t = field(6); !t.empty()) r.severity = parse_severity(parse_int_field(t, "SEVERITY"));
  r.county = std::string(field(7));

  const std::size_t flag_base = kFixedColumns.size();
  for (std::size_t i = 0; i < kFlagCount; ++i) {
    const auto t = field(flag_base + i);
    if (t.empty()) continue;
    if (t == "0") r.flags[i] = false;
    else if (t == "1") r.flags[i] = true;
    else {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(flag_name(static_cast<Flag>(i))) + ": flag must be 0, 1 or empty");
    }
  }
  const std::size_t code_base = flag_base + kFlagCount;
  for (std::size_t i = 0; i < kCodeCount; ++i) {
    const auto t = field(code_base + i);
    if (t.empty()) continue;
    const auto name = code_name(static_cast<CodeField>(i));
    const int v = parse_int_field(t, name);
    const int hi = i == index_of(CodeField::kWeather1) ? kWeatherCategoryCount : 99;
    const int lo = i == index_of(CodeField::kWeather1) ? 1 : 0;
    if (v < lo || v > hi) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " code out of range");
    r.codes[i] = v;
  }
  return r;
}

std::string to_csv_row(const CrashRecord& r) {
  std::string row = csv_escape(r.id);
  row.push_back(',');
  if (r.location) {
    row += format_double(r.location->lat());
    row.push_back(',');
    row += format_double(r.location->lon());
  } else {
    row.push_back(',');
  }
  row.push_back(',');
  if (r.occurred_at) row += format_iso8601(*r.occurred_at);
  row.push_back(',');
  if (r.hour_of_day) row += std::to_string(*r.hour_of_day);
  row.push_back(',');
  if (r.crash_month) row += std::to_string(*r.crash_month);
  row.push_back(',');
  if (r.severity) row += std::to_string(severity_index(*r.severity));
  row.push_back(',');
  row += csv_escape(r.county);
  for (const auto& f : r.flags) {
    row.push_back(',');
    if (f) row.push_back(*f ? '1' : '0');
  }
  for (const auto& c : r.codes) {
    row.push_back(',');
    if (c) row += std::to_string(*c);
  }
  return row;
}

void write_records_csv(std::ostream& out, std::span<const CrashRecord> records) {
  const auto header = canonical_header();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& r : records) out << to_csv_row(r) << '\n';
}

void write_records_csv(const std::string& path, std::span<const CrashRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kUnreadableFile, "cannot open for writing: " + path);
  write_records_csv(out, records);
  if (!out) throw Error(ErrorCode::kUnreadableFile, "write failed: " + path);
}

}  // namespace crashcast
