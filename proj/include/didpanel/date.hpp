#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace didpanel {

/// Calendar day. All arithmetic in the library is in whole days.
using Date = std::chrono::sys_days;
using Days = std::chrono::days;

Date make_date(int year, unsigned month, unsigned day);

/// Accepts ISO `YYYY-MM-DD`, compact `YYYYMMDD`, and US `M/D/YYYY` or `M/D/YY`.
/// Returns nullopt for anything else, including impossible days like 02/30.
std::optional<Date> try_parse_date(std::string_view text);

/// Throws std::invalid_argument on failure.
Date parse_date(std::string_view text);

/// ISO-8601 `YYYY-MM-DD`.
std::string format_date(Date d);

inline Date add_days(Date d, int n) { return d + Days{n}; }
inline int days_between(Date from, Date to) { return static_cast<int>((to - from).count()); }

}  // namespace didpanel
