#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mtocs::storage::csv {

using Row = std::vector<std::string>;

/// Quotes a field when it contains a comma, quote, CR or LF (RFC 4180).
std::string escape(std::string_view field);

/// Appends one LF-terminated record.
void append_row(std::string& out, const Row& row);

/// Splits a document into records. Accepts LF or CRLF line ends and quoted
/// fields spanning lines; a trailing newline does not produce an empty row.
/// Throws Error(FormatError) on a stray quote or an unterminated field.
std::vector<Row> parse(std::string_view text);

}  // namespace mtocs::storage::csv
