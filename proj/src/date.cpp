#include "didpanel/date.hpp"

#include <charconv>
#include <stdexcept>

#include <fmt/format.h>

namespace didpanel {

namespace {

std::optional<int> to_int(std::string_view s) {
  if (s.empty() || s.size() > 9) return std::nullopt;
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

std::optional<Date> checked(int y, int m, int d) {
  if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

}  // namespace

Date make_date(int year, unsigned month, unsigned day) {
  auto d = checked(year, static_cast<int>(month), static_cast<int>(day));
  if (!d) throw std::invalid_argument(fmt::format("invalid date {}-{}-{}", year, month, day));
  return *d;
}

std::optional<Date> try_parse_date(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);

  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    auto y = to_int(s.substr(0, 4)), m = to_int(s.substr(5, 2)), d = to_int(s.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    return checked(*y, *m, *d);
  }
  if (s.size() == 8 && s.find_first_not_of("0123456789") == std::string_view::npos) {
    auto y = to_int(s.substr(0, 4)), m = to_int(s.substr(4, 2)), d = to_int(s.substr(6, 2));
    if (!y || !m || !d) return std::nullopt;
    return checked(*y, *m, *d);
  }
  auto first = s.find('/');
  auto second = first == std::string_view::npos ? first : s.find('/', first + 1);
  if (second != std::string_view::npos && s.find('/', second + 1) == std::string_view::npos) {
    auto m = to_int(s.substr(0, first));
    auto d = to_int(s.substr(first + 1, second - first - 1));
    auto ytext = s.substr(second + 1);
    auto y = to_int(ytext);
    if (!m || !d || !y) return std::nullopt;
    if (ytext.size() == 2) {
      *y += 2000;
    } else if (ytext.size() != 4) {
      return std::nullopt;
    }
    return checked(*y, *m, *d);
  }
  return std::nullopt;
}

Date parse_date(std::string_view text) {
  auto d = try_parse_date(text);
  if (!d) throw std::invalid_argument(fmt::format("malformed date '{}'", text));
  return *d;
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

}  // namespace didpanel
