#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "didpanel/date.hpp"

namespace didpanel {

/// Inclusive range of calendar dates accepted from the input files.
struct StudyWindow {
  Date start = make_date(2020, 3, 1);
  Date end = make_date(2020, 5, 7);

  bool contains(Date d) const { return d >= start && d <= end; }
};

/// A county and the earliest date any order covering it came into effect.
struct OrderRecord {
  std::string fips;  // exactly five digits
  std::string state;
  std::string county_name;
  std::optional<Date> order_effective;

  friend bool operator==(const OrderRecord&, const OrderRecord&) = default;
};

/// One row of the public county time series: cumulative counts to date.
struct CaseRow {
  Date date;
  std::string fips;
  std::string county;
  std::string state;
  std::int64_t cumulative_cases = 0;
  std::int64_t cumulative_deaths = 0;

  friend bool operator==(const CaseRow&, const CaseRow&) = default;
};

struct TestRow {
  Date date;
  std::string state;
  std::int64_t cumulative_tests = 0;

  friend bool operator==(const TestRow&, const TestRow&) = default;
};

/// Row accounting for one input file. Every input row is either retained or
/// counted under exactly one reason.
struct DropLog {
  std::size_t input_rows = 0;
  std::size_t retained_rows = 0;
  std::map<std::string, std::size_t> by_reason;
  /// Row annotations that did not remove the row.
  std::map<std::string, std::size_t> notes;

  std::size_t dropped() const;
  std::size_t count(const std::string& reason) const;
  void drop(const std::string& reason, std::size_t n = 1) { by_reason[reason] += n; }
  bool balanced() const { return input_rows == retained_rows + dropped(); }
};

/// Maps logical order fields to column names in the orders file.
struct OrderSchema {
  std::string fips = "fips";
  std::string state = "state";
  std::string county = "county";
  std::string order_effective = "order_effective";
};

struct ParsedOrders {
  std::vector<OrderRecord> records;  // sorted by fips
  DropLog log;
};

struct ParsedCases {
  std::vector<CaseRow> rows;  // sorted by (date, fips)
  DropLog log;
};

struct ParsedTests {
  std::vector<TestRow> rows;  // sorted by (state, date)
  DropLog log;
};

/// Resolves city, county and statewide rows to one record per county holding
/// the earliest effective date. An empty date means the county is listed
/// without an order. Dates outside the window are cleared (noted as
/// `order_outside_window`), so the county counts as never ordered.
ParsedOrders parse_orders(std::istream& in, const OrderSchema& schema = {},
                          const StudyWindow& window = {});

/// Drops rows with no county assignment (`unassigned`) and rows dated outside
/// the window (`outside_window`). Declining cumulative counts are kept as is.
ParsedCases parse_cases(std::istream& in, const StudyWindow& window = {});

/// Reads `date,state,totalTestResults`; other columns are ignored. Blank
/// values are carried forward from the state's previous date (zero before
/// its first value).
ParsedTests parse_tests(std::istream& in);

struct RawDataset {
  std::vector<OrderRecord> orders;
  std::vector<CaseRow> cases;
  std::vector<TestRow> tests;
  DropLog orders_log;
  DropLog cases_log;
  DropLog tests_log;
};

struct DatasetPaths {
  std::filesystem::path orders;
  std::filesystem::path cases;
  std::optional<std::filesystem::path> tests;
};

/// Opens and parses all inputs. Throws DataError naming any missing path;
/// parse failures are rethrown as DataError with the file name prepended.
RawDataset load_dataset(const DatasetPaths& paths, const StudyWindow& window = {},
                        const OrderSchema& schema = {});

void write_orders(std::ostream& out, std::span<const OrderRecord> orders);
void write_cases(std::ostream& out, std::span<const CaseRow> rows);
void write_tests(std::ostream& out, std::span<const TestRow> rows);

/// Two-letter postal code for the state part of a county FIPS code, or an
/// empty string when the prefix is unknown.
std::string state_code_for_fips(const std::string& fips);

}  // namespace didpanel
