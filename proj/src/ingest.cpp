#include "didpanel/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <tuple>

#include <fmt/format.h>

#include "didpanel/csv.hpp"
#include "didpanel/error.hpp"

namespace didpanel {

std::size_t DropLog::dropped() const {
  std::size_t n = 0;
  for (const auto& [reason, count] : by_reason) n += count;
  return n;
}

std::size_t DropLog::count(const std::string& reason) const {
  auto it = by_reason.find(reason);
  return it == by_reason.end() ? 0 : it->second;
}

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool is_fips(const std::string& s) {
  return s.size() == 5 && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

bool is_state_code(const std::string& s) {
  return s.size() == 2 && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isupper(c); });
}

std::int64_t parse_count(const std::string& text, std::size_t line, const char* field) {
  std::int64_t v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc{} || ptr != last) {
    throw ParseError(line, fmt::format("{} is not an integer: '{}'", field, text));
  }
  if (v < 0) throw ParseError(line, fmt::format("{} is negative: {}", field, v));
  return v;
}

Date parse_row_date(const std::string& text, std::size_t line) {
  auto d = try_parse_date(text);
  if (!d) throw ParseError(line, fmt::format("malformed date '{}'", text));
  return *d;
}

}  // namespace

ParsedOrders parse_orders(std::istream& in, const OrderSchema& schema, const StudyWindow& window) {
  ParsedOrders out;
  csv::Reader reader(in);
  if (reader.empty_input()) return out;
  const auto c_fips = reader.require_column(schema.fips);
  const auto c_state = reader.require_column(schema.state);
  const auto c_date = reader.require_column(schema.order_effective);
  const auto c_county = reader.column(schema.county);

  std::map<std::string, OrderRecord> by_fips;
  std::vector<std::string> f;
  while (reader.next(f)) {
    ++out.log.input_rows;
    OrderRecord rec;
    rec.fips = trim(f[c_fips]);
    rec.state = trim(f[c_state]);
    if (c_county) rec.county_name = trim(f[*c_county]);
    if (!is_fips(rec.fips)) throw ParseError(reader.line(), fmt::format("invalid fips '{}'", rec.fips));
    if (!is_state_code(rec.state)) {
      throw ParseError(reader.line(), fmt::format("invalid state code '{}'", rec.state));
    }
    auto date_text = trim(f[c_date]);
    if (!date_text.empty()) {
      Date d = parse_row_date(date_text, reader.line());
      if (window.contains(d)) {
        rec.order_effective = d;
      } else {
        ++out.log.notes["order_outside_window"];
      }
    }

    auto [it, inserted] = by_fips.try_emplace(rec.fips, rec);
    if (inserted) continue;
    OrderRecord& kept = it->second;
    if (kept.order_effective == rec.order_effective) {
      out.log.drop("duplicate");
    } else {
      out.log.drop("superseded");
      bool earlier = rec.order_effective &&
                     (!kept.order_effective || *rec.order_effective < *kept.order_effective);
      if (earlier) kept.order_effective = rec.order_effective;
    }
    if (kept.county_name.empty()) kept.county_name = rec.county_name;
  }

  out.records.reserve(by_fips.size());
  for (auto& [fips, rec] : by_fips) out.records.push_back(std::move(rec));
  out.log.retained_rows = out.records.size();
  return out;
}

ParsedCases parse_cases(std::istream& in, const StudyWindow& window) {
  ParsedCases out;
  csv::Reader reader(in);
  if (reader.empty_input()) return out;
  const auto c_date = reader.require_column("date");
  const auto c_county = reader.require_column("county");
  const auto c_state = reader.require_column("state");
  const auto c_fips = reader.require_column("fips");
  const auto c_cases = reader.require_column("cases");
  const auto c_deaths = reader.require_column("deaths");

  std::vector<std::string> f;
  while (reader.next(f)) {
    ++out.log.input_rows;
    CaseRow row;
    row.date = parse_row_date(trim(f[c_date]), reader.line());
    row.county = trim(f[c_county]);
    row.state = trim(f[c_state]);
    row.fips = trim(f[c_fips]);
    row.cumulative_cases = parse_count(trim(f[c_cases]), reader.line(), "cases");
    row.cumulative_deaths = parse_count(trim(f[c_deaths]), reader.line(), "deaths");
    if (row.fips.empty()) {
      out.log.drop("unassigned");
      continue;
    }
    if (!is_fips(row.fips)) throw ParseError(reader.line(), fmt::format("invalid fips '{}'", row.fips));
    if (!window.contains(row.date)) {
      out.log.drop("outside_window");
      continue;
    }
    out.rows.push_back(std::move(row));
  }

  std::stable_sort(out.rows.begin(), out.rows.end(), [](const CaseRow& a, const CaseRow& b) {
    return std::tie(a.date, a.fips) < std::tie(b.date, b.fips);
  });
  std::vector<CaseRow> unique;
  unique.reserve(out.rows.size());
  for (auto& row : out.rows) {
    if (!unique.empty() && unique.back().date == row.date && unique.back().fips == row.fips) {
      if (unique.back().cumulative_cases != row.cumulative_cases ||
          unique.back().cumulative_deaths != row.cumulative_deaths) {
        throw DataError(fmt::format("conflicting rows for county {} on {}", row.fips, format_date(row.date)));
      }
      out.log.drop("duplicate");
      continue;
    }
    unique.push_back(std::move(row));
  }
  out.rows = std::move(unique);
  out.log.retained_rows = out.rows.size();
  return out;
}

ParsedTests parse_tests(std::istream& in) {
  ParsedTests out;
  csv::Reader reader(in);
  if (reader.empty_input()) return out;
  const auto c_date = reader.require_column("date");
  const auto c_state = reader.require_column("state");
  const auto c_total = reader.require_column("totalTestResults");

  struct Entry {
    Date date;
    std::string state;
    std::optional<std::int64_t> value;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::vector<std::string> f;
  while (reader.next(f)) {
    ++out.log.input_rows;
    Entry e;
    e.date = parse_row_date(trim(f[c_date]), reader.line());
    e.state = trim(f[c_state]);
    e.line = reader.line();
    if (e.state.empty()) throw ParseError(reader.line(), "missing state");
    auto text = trim(f[c_total]);
    if (!text.empty()) e.value = parse_count(text, reader.line(), "totalTestResults");
    entries.push_back(std::move(e));
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.state, a.date) < std::tie(b.state, b.date);
  });

  std::vector<Entry> merged;
  for (auto& e : entries) {
    if (!merged.empty() && merged.back().state == e.state && merged.back().date == e.date) {
      auto& prev = merged.back();
      if (prev.value && e.value && *prev.value != *e.value) {
        throw ParseError(e.line, fmt::format("conflicting test totals for {} on {}: {} vs {}", e.state,
                                             format_date(e.date), *prev.value, *e.value));
      }
      if (!prev.value) prev.value = e.value;
      out.log.drop("duplicate");
      continue;
    }
    merged.push_back(std::move(e));
  }

  std::string state;
  std::int64_t carried = 0;
  for (const auto& e : merged) {
    if (e.state != state) {
      state = e.state;
      carried = 0;
    }
    if (e.value) carried = *e.value;
    out.rows.push_back(TestRow{e.date, e.state, carried});
  }
  out.log.retained_rows = out.rows.size();
  return out;
}

RawDataset load_dataset(const DatasetPaths& paths, const StudyWindow& window, const OrderSchema& schema) {
  auto open = [](const std::filesystem::path& p, const char* what) {
    std::ifstream in(p);
    if (!in) throw DataError(fmt::format("cannot open {} file '{}'", what, p.string()));
    return in;
  };
  auto with_file = [](const std::filesystem::path& p, auto&& fn) {
    try {
      return fn();
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}: {}", p.string(), e.what()));
    }
  };

  RawDataset ds;
  {
    auto in = open(paths.orders, "orders");
    auto parsed = with_file(paths.orders, [&] { return parse_orders(in, schema, window); });
    ds.orders = std::move(parsed.records);
    ds.orders_log = std::move(parsed.log);
  }
  {
    auto in = open(paths.cases, "cases");
    auto parsed = with_file(paths.cases, [&] { return parse_cases(in, window); });
    ds.cases = std::move(parsed.rows);
    ds.cases_log = std::move(parsed.log);
  }
  if (paths.tests) {
    auto in = open(*paths.tests, "tests");
    auto parsed = with_file(*paths.tests, [&] { return parse_tests(in); });
    ds.tests = std::move(parsed.rows);
    ds.tests_log = std::move(parsed.log);
  }
  return ds;
}

void write_orders(std::ostream& out, std::span<const OrderRecord> orders) {
  csv::write_row(out, {"fips", "state", "county", "order_effective"});
  for (const auto& o : orders) {
    csv::write_row(out, {o.fips, o.state, o.county_name, o.order_effective ? format_date(*o.order_effective) : ""});
  }
}

void write_cases(std::ostream& out, std::span<const CaseRow> rows) {
  csv::write_row(out, {"date", "county", "state", "fips", "cases", "deaths"});
  for (const auto& r : rows) {
    csv::write_row(out, {format_date(r.date), r.county, r.state, r.fips, std::to_string(r.cumulative_cases),
                         std::to_string(r.cumulative_deaths)});
  }
}

void write_tests(std::ostream& out, std::span<const TestRow> rows) {
  csv::write_row(out, {"date", "state", "totalTestResults"});
  for (const auto& r : rows) {
    csv::write_row(out, {format_date(r.date), r.state, std::to_string(r.cumulative_tests)});
  }
}

std::string state_code_for_fips(const std::string& fips) {
  static const std::map<std::string, std::string> kPrefix = {
      {"01", "AL"}, {"02", "AK"}, {"04", "AZ"}, {"05", "AR"}, {"06", "CA"}, {"08", "CO"}, {"09", "CT"},
      {"10", "DE"}, {"11", "DC"}, {"12", "FL"}, {"13", "GA"}, {"15", "HI"}, {"16", "ID"}, {"17", "IL"},
      {"18", "IN"}, {"19", "IA"}, {"20", "KS"}, {"21", "KY"}, {"22", "LA"}, {"23", "ME"}, {"24", "MD"},
      {"25", "MA"}, {"26", "MI"}, {"27", "MN"}, {"28", "MS"}, {"29", "MO"}, {"30", "MT"}, {"31", "NE"},
      {"32", "NV"}, {"33", "NH"}, {"34", "NJ"}, {"35", "NM"}, {"36", "NY"}, {"37", "NC"}, {"38", "ND"},
      {"39", "OH"}, {"40", "OK"}, {"41", "OR"}, {"42", "PA"}, {"44", "RI"}, {"45", "SC"}, {"46", "SD"},
      {"47", "TN"}, {"48", "TX"}, {"49", "UT"}, {"50", "VT"}, {"51", "VA"}, {"53", "WA"}, {"54", "WV"},
      {"55", "WI"}, {"56", "WY"}, {"60", "AS"}, {"66", "GU"}, {"69", "MP"}, {"72", "PR"}, {"78", "VI"},
  };
  if (fips.size() < 2) return {};
  auto it = kPrefix.find(fips.substr(0, 2));
  return it == kPrefix.end() ? std::string{} : it->second;
}

}  // namespace didpanel
