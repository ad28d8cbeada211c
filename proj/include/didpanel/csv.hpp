#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace didpanel::csv {

/// Minimal RFC-4180 reader: comma delimiter, double-quoted fields, mandatory
/// header row. Records spanning lines are not supported.
class Reader {
 public:
  explicit Reader(std::istream& in);

  const std::vector<std::string>& header() const { return header_; }
  bool empty_input() const { return empty_; }

  /// Column position by name, or nullopt if absent.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Same, but throws DataError naming the missing column.
  std::size_t require_column(std::string_view name) const;

  /// Reads the next non-blank record. Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  /// 1-based physical line number of the record last returned by next().
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
  bool empty_ = false;
};

std::vector<std::string> split_line(std::string_view line, std::size_t line_no);

/// Quotes a field only when it contains a comma, quote, or newline.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace didpanel::csv
