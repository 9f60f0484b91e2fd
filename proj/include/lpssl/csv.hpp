#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lpssl::csv {

/// Parses RFC 4180 CSV: quoted fields may hold commas, doubled quotes and
/// newlines. CRLF and LF line endings are both accepted.
std::vector<std::vector<std::string>> parse(std::istream& in);

/// Quotes a field when it contains a comma, quote or line break.
std::string escape(std::string_view field);

}  // namespace lpssl::csv
