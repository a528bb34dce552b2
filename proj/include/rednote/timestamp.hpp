#ifndef REDNOTE_TIMESTAMP_HPP
#define REDNOTE_TIMESTAMP_HPP

#include <charconv>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "rednote/common.hpp"

namespace rednote {

/// Second-resolution UTC instant, stored as seconds since 1970-01-01.
struct Timestamp {
  std::int64_t seconds = 0;
  auto operator<=>(const Timestamp&) const = default;
};

namespace detail {

// Howard Hinnant's days_from_civil.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m,
                               unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

inline bool read_fixed(std::string_view s, std::size_t pos, std::size_t len,
                       unsigned& out) {
  if (pos + len > s.size()) return false;
  const char* b = s.data() + pos;
  for (std::size_t i = 0; i < len; ++i) {
    if (b[i] < '0' || b[i] > '9') return false;
  }
  return std::from_chars(b, b + len, out).ec == std::errc{};
}

}  // namespace detail

/// Parses "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS" or "YYYY-MM-DD HH:MM:SS",
/// optionally followed by fractional seconds (truncated) and "Z".
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  unsigned y, mo, d, h = 0, mi = 0, se = 0;
  if (!detail::read_fixed(s, 0, 4, y) || s.size() < 10 || s[4] != '-' ||
      s[7] != '-' || !detail::read_fixed(s, 5, 2, mo) ||
      !detail::read_fixed(s, 8, 2, d)) {
    return std::nullopt;
  }
  std::size_t pos = 10;
  if (s.size() > 10) {
    if ((s[10] != 'T' && s[10] != ' ') || s.size() < 19 || s[13] != ':' ||
        s[16] != ':' || !detail::read_fixed(s, 11, 2, h) ||
        !detail::read_fixed(s, 14, 2, mi) ||
        !detail::read_fixed(s, 17, 2, se)) {
      return std::nullopt;
    }
    pos = 19;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    }
    if (pos < s.size() && s[pos] == 'Z') ++pos;
  }
  if (pos != s.size() || mo < 1 || mo > 12 || d < 1 || h > 23 || mi > 59 || se > 59) {
    return std::nullopt;
  }
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (d > kDays[mo - 1] + (mo == 2 && leap ? 1 : 0)) return std::nullopt;
  const auto days = detail::days_from_civil(y, mo, d);
  return Timestamp{days * 86400 + h * 3600 + mi * 60 + se};
}

/// Renders as "YYYY-MM-DDTHH:MM:SS".
inline std::string to_iso(Timestamp t) {
  std::int64_t days = t.seconds / 86400;
  std::int64_t rem = t.seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  detail::civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lld",
                static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600),
                static_cast<long long>(rem / 60 % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

}  // namespace rednote

#endif  // REDNOTE_TIMESTAMP_HPP
