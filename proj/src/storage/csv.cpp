#include "mtocs/storage/csv.hpp"

#include "mtocs/error.hpp"

namespace mtocs::storage::csv {

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void append_row(std::string& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += escape(row[i]);
  }
  out += '\n';
}

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false;      // inside a quoted field
  bool was_quoted = false;  // current field started with a quote
  bool row_open = false;

  auto location = [&] {
    return "row " + std::to_string(rows.size() + 1) + ", column " + std::to_string(row.size() + 1);
  };
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    row_open = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || was_quoted) fail(ErrorCode::FormatError, "stray quote at " + location(), location());
        quoted = was_quoted = row_open = true;
        break;
      case ',':
        end_field();
        row_open = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        fail(ErrorCode::FormatError, "bare carriage return at " + location(), location());
      case '\n':
        end_row();
        break;
      default:
        if (was_quoted) fail(ErrorCode::FormatError, "text after closing quote at " + location(), location());
        field += c;
        row_open = true;
    }
  }
  if (quoted) fail(ErrorCode::FormatError, "unterminated quoted field at " + location(), location());
  if (row_open || !field.empty()) end_row();
  return rows;
}

}  // namespace mtocs::storage::csv
