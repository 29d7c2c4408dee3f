#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace projsafe::csv {

/// Shortest-safe round-trip formatting: 17 significant digits.
std::string fmt(double v);

void write_row(std::ostream& os, const std::vector<std::string>& fields);

/// Splits one line on commas. No quoting support; all files written by the
/// toolkit are purely numeric.
std::vector<std::string> split(const std::string& line);

double parse_double(const std::string& field);

}  // namespace projsafe::csv
