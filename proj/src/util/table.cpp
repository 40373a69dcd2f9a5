#include "labloom/table.hpp"

#include "labloom/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace labloom {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double parse_number(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double v = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::schema, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::size_t Table::column_index(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) {
    throw Error(ErrorCode::schema, "table has no column '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - columns_.begin());
}

bool Table::has_column(std::string_view name) const {
  return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
}

double Table::number(std::size_t row, std::size_t col) const {
  return parse_number(cell(row, col));
}

std::vector<double> Table::column_values(std::string_view name) const {
  const auto c = column_index(name);
  std::vector<double> out;
  out.reserve(cells_.size());
  for (std::size_t r = 0; r < cells_.size(); ++r) out.push_back(number(r, c));
  return out;
}

std::vector<std::vector<double>> Table::numeric_rows(const std::vector<std::string>& names) const {
  std::vector<std::size_t> idx;
  for (const auto& n : names) idx.push_back(column_index(n));
  std::vector<std::vector<double>> out(cells_.size());
  for (std::size_t r = 0; r < cells_.size(); ++r) {
    out[r].reserve(idx.size());
    for (auto c : idx) out[r].push_back(number(r, c));
  }
  return out;
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns_.size()) {
    throw Error(ErrorCode::schema, "row has " + std::to_string(row.size()) + " cells, expected " +
                                       std::to_string(columns_.size()));
  }
  cells_.push_back(std::move(row));
}

void Table::add_numeric_row(const std::vector<double>& row) {
  std::vector<std::string> text;
  text.reserve(row.size());
  for (double v : row) text.push_back(format_number(v));
  add_row(std::move(text));
}

namespace {

bool needs_quotes(const std::string& s) {
  return s.find_first_of(",\"\n\r") != std::string::npos;
}

void append_field(std::string& out, const std::string& s) {
  if (!needs_quotes(s)) {
    out += s;
    return;
  }
  out.push_back('"');
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

void append_line(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    append_field(out, fields[i]);
  }
  out.push_back('\n');
}

}  // namespace

std::string Table::to_csv() const {
  std::string out;
  append_line(out, columns_);
  for (const auto& row : cells_) append_line(out, row);
  return out;
}

Table Table::from_csv(std::string_view text) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t line_no = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      field.clear();
      lines.push_back(std::move(fields));
      fields.clear();
      any = false;
      ++line_no;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::parse, "unterminated quoted CSV field at line " + std::to_string(line_no));
  if (any || !field.empty()) {
    fields.push_back(std::move(field));
    lines.push_back(std::move(fields));
  }
  if (lines.empty()) throw Error(ErrorCode::parse, "CSV has no header row");
  Table t(std::move(lines.front()));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].size() == 1 && lines[i][0].empty()) continue;
    if (lines[i].size() != t.cols()) {
      throw Error(ErrorCode::parse, "CSV row " + std::to_string(i + 1) + " has " +
                                        std::to_string(lines[i].size()) + " fields, expected " +
                                        std::to_string(t.cols()));
    }
    t.cells_.push_back(std::move(lines[i]));
  }
  return t;
}

}  // namespace labloom
