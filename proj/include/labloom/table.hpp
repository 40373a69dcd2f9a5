#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace labloom {

/// Rectangular text table backing every CSV artifact.
///
/// Cells are kept as text so that foreign columns (ids, labels) survive a
/// round trip; numeric access goes through number()/column_values().
class Table {
 public:
  Table() = default;
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return cells_.size(); }
  std::size_t cols() const { return columns_.size(); }

  /// Column position, throws ErrorCode::schema when absent.
  std::size_t column_index(std::string_view name) const;
  bool has_column(std::string_view name) const;

  const std::string& cell(std::size_t row, std::size_t col) const { return cells_.at(row).at(col); }
  double number(std::size_t row, std::size_t col) const;
  std::vector<double> column_values(std::string_view name) const;

  /// Rows restricted to the named columns, as numbers.
  std::vector<std::vector<double>> numeric_rows(const std::vector<std::string>& names) const;

  void add_row(std::vector<std::string> row);
  void add_numeric_row(const std::vector<double>& row);

  /// Header row plus one line per row, `\n` terminated.
  std::string to_csv() const;
  static Table from_csv(std::string_view text);

  bool operator==(const Table&) const = default;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> cells_;
};

/// Shortest round-trip decimal representation.
std::string format_number(double value);

/// Strict decimal parse; throws ErrorCode::schema on trailing junk.
double parse_number(std::string_view text);

}  // namespace labloom
