#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace stgan {

/// Naive local civil time at minute resolution, counted from 1970-01-01 00:00.
/// No time zone or DST logic: wall-clock labels are taken as given.
struct Timestamp {
  std::int64_t minutes = 0;

  static Timestamp parse(std::string_view text);  // "YYYY-MM-DDTHH:MM"
  static Timestamp from_civil(int year, unsigned month, unsigned day, int hour, int minute);

  std::string to_string() const;
  std::int64_t day() const;           // days since epoch
  int minute_of_day() const;          // 0..1439
  int hour() const { return minute_of_day() / 60; }
  int weekday() const;                // Monday = 0 ... Sunday = 6
  std::string date_string() const;    // "YYYY-MM-DD"

  Timestamp operator+(std::int64_t m) const { return Timestamp{minutes + m}; }
  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

inline constexpr std::int64_t kMinutesPerDay = 1440;

// "HH:MM" -> minute of day.
int parse_clock(std::string_view text);
std::string format_clock(int minute_of_day);

}  // namespace stgan
