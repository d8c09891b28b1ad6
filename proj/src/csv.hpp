#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fpe::csv {

// RFC 4180 reader: quoted fields, doubled quotes, CRLF, leading UTF-8 BOM.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string>& fields);
  // 1-based line on which the last returned row started.
  std::size_t line() const noexcept { return row_line_; }

 private:
  std::istream& in_;
  std::size_t line_{1};
  std::size_t row_line_{0};
  bool started_{false};
};

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace fpe::csv
