#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace crashcast {

using Timestamp = std::chrono::sys_seconds;

// Parses "YYYY-MM-DDTHH:MM:SS" with an optional trailing 'Z' (UTC only).
std::optional<Timestamp> parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp t);

struct CivilTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;
  int weekday = 4;  // 0 = Sunday
};

CivilTime to_civil(Timestamp t);
Timestamp from_civil(int year, int month, int day, int hour = 0, int minute = 0, int second = 0);

// Index of the 15-minute bucket containing t, counted from the epoch.
std::int64_t time_bucket_15m(Timestamp t);
Timestamp bucket_start_15m(std::int64_t bucket);

}  // namespace crashcast
