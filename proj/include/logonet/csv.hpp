#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace logonet {

using CsvRow = std::vector<std::string>;

/// RFC 4180 parsing: comma separated, double-quoted fields may hold commas,
/// doubled quotes and line breaks. Accepts LF or CRLF line ends and a
/// leading UTF-8 BOM. Blank lines are skipped.
std::vector<CsvRow> parse_csv(std::string_view text);

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(std::string_view value);
std::string csv_line(const CsvRow& fields);

}  // namespace logonet
