#include "projsafe/csv.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

#include "projsafe/errors.hpp"

namespace projsafe::csv {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) os << ',';
    os << fields[i];
  }
  os << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size()) throw Error("trailing characters in number '" + field + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error("cannot parse number '" + field + "'");
  }
}

}  // namespace projsafe::csv
