#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace emm {

// RFC-4180-ish reader: quoted fields, embedded commas, quotes and newlines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Reads the next record into fields. Returns false at end of input.
  bool next(std::vector<std::string>& fields);

 private:
  std::istream& in_;
};

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace emm
