#pragma once

#include <concepts>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pdmp {

/// Round-trip decimal form of a double ("%.17g"); the same bits always
/// print the same text, which the reproducibility checks rely on.
std::string format_real(double value);

/// One CSV line assembled field by field. Fields are written verbatim, so
/// callers keep text fields free of commas.
class CsvRow {
 public:
  CsvRow& add(double value) { return push(format_real(value)); }
  CsvRow& add(std::string_view text) { return push(std::string(text)); }
  CsvRow& add(const char* text) { return push(text); }
  template <std::integral I>
  CsvRow& add(I value) {
    return push(std::to_string(value));
  }

  std::string str() const;
  void write(std::ostream& out) const { out << str() << '\n'; }

 private:
  CsvRow& push(std::string field) {
    fields_.push_back(std::move(field));
    return *this;
  }
  std::vector<std::string> fields_;
};

void write_csv_header(std::ostream& out, const std::vector<std::string>& columns);

}  // namespace pdmp
