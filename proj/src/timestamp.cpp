// SPDX-License-Identifier: Apache-2.0
#include "m2g2/timestamp.hpp"

#include <charconv>
#include <cstdio>

#include "m2g2/errors.hpp"

namespace m2g2 {
namespace {

// Howard Hinnant's civil-calendar conversions.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

int read_int(std::string_view text, std::size_t pos, std::size_t len) {
  int v = 0;
  if (pos + len > text.size()) throw DataError("bad timestamp '" + std::string(text) + "'");
  auto res = std::from_chars(text.data() + pos, text.data() + pos + len, v);
  if (res.ec != std::errc() || res.ptr != text.data() + pos + len) {
    throw DataError("bad timestamp '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

UnixSeconds parse_timestamp(std::string_view text) {
  if (!text.empty() && (text.back() == 'Z' || text.back() == 'z')) text.remove_suffix(1);
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
    throw DataError("bad timestamp '" + std::string(text) + "'");
  }
  const int year = read_int(text, 0, 4);
  const int month = read_int(text, 5, 2);
  const int day = read_int(text, 8, 2);
  int hour = 0, minute = 0, second = 0;
  if (text.size() > 10) {
    if ((text[10] != 'T' && text[10] != ' ') || text.size() < 16 || text[13] != ':') {
      throw DataError("bad timestamp '" + std::string(text) + "'");
    }
    hour = read_int(text, 11, 2);
    minute = read_int(text, 14, 2);
    if (text.size() > 16) {
      if (text.size() != 19 || text[16] != ':') {
        throw DataError("bad or non-UTC timestamp '" + std::string(text) + "'");
      }
      second = read_int(text, 17, 2);
    }
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
      second > 60) {
    throw DataError("timestamp out of range '" + std::string(text) + "'");
  }
  const std::int64_t days =
      days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  return days * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(UnixSeconds t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld",
                static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                static_cast<long long>((rem / 60) % 60), static_cast<long long>(rem % 60));
  return buf;
}

}  // namespace m2g2
