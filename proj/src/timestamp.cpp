#include "stgan/timestamp.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "stgan/errors.hpp"

namespace stgan {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("invalid timestamp '" + std::string(whole) + "'");
  }
  return v;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

Timestamp Timestamp::from_civil(int year, unsigned month, unsigned day, int hour, int minute) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok() || hour < 0 || hour > 23 || minute < 0 || minute > 59) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", year, month, day, hour, minute);
    throw DataError(std::string("invalid calendar time ") + buf);
  }
  const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
  return Timestamp{days * kMinutesPerDay + hour * 60 + minute};
}

Timestamp Timestamp::parse(std::string_view text) {
  // YYYY-MM-DDTHH:MM (a space separator is accepted as well)
  if (text.size() != 16 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':') {
    throw DataError("invalid timestamp '" + std::string(text) + "', expected YYYY-MM-DDTHH:MM");
  }
  return from_civil(parse_int(text.substr(0, 4), text), static_cast<unsigned>(parse_int(text.substr(5, 2), text)),
                    static_cast<unsigned>(parse_int(text.substr(8, 2), text)), parse_int(text.substr(11, 2), text),
                    parse_int(text.substr(14, 2), text));
}

std::int64_t Timestamp::day() const { return floor_div(minutes, kMinutesPerDay); }

int Timestamp::minute_of_day() const { return static_cast<int>(minutes - day() * kMinutesPerDay); }

int Timestamp::weekday() const {
  using namespace std::chrono;
  const std::chrono::weekday wd{sys_days{days{day()}}};
  return static_cast<int>(wd.iso_encoding()) - 1;
}

std::string Timestamp::date_string() const {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{day()}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string Timestamp::to_string() const { return date_string() + "T" + format_clock(minute_of_day()); }

int parse_clock(std::string_view text) {
  if (text.size() != 5 || text[2] != ':') throw ConfigError("invalid clock time '" + std::string(text) + "', expected HH:MM");
  int h = 0, m = 0;
  auto r1 = std::from_chars(text.data(), text.data() + 2, h);
  auto r2 = std::from_chars(text.data() + 3, text.data() + 5, m);
  if (r1.ec != std::errc() || r2.ec != std::errc() || h < 0 || h > 23 || m < 0 || m > 59) {
    throw ConfigError("invalid clock time '" + std::string(text) + "'");
  }
  return h * 60 + m;
}

std::string format_clock(int minute_of_day) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minute_of_day / 60, minute_of_day % 60);
  return buf;
}

}  // namespace stgan
