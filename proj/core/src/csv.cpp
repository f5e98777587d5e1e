#include "pdmp/csv.hpp"

#include <cstdio>

namespace pdmp {

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string CsvRow::str() const {
  std::string line;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (i) line += ',';
    line += fields_[i];
  }
  return line;
}

void write_csv_header(std::ostream& out, const std::vector<std::string>& columns) {
  CsvRow row;
  for (const auto& c : columns) row.add(c);
  row.write(out);
}

}  // namespace pdmp
