#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace absplit::csv {

// RFC 4180 subset: comma separated, double-quote quoting, one record per line
// (quoted fields may not contain newlines).
std::vector<std::string> split_line(std::string_view line);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Streaming reader with a header row. Lines that are empty are skipped.
class Reader {
 public:
  explicit Reader(const std::string& path);

  const std::vector<std::string>& header() const noexcept { return header_; }
  // Index of a required column; throws Parse naming the file when absent.
  std::size_t column(std::string_view name) const;
  std::ptrdiff_t find_column(std::string_view name) const;

  bool next(std::vector<std::string>& fields);
  std::size_t line_number() const noexcept { return line_no_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::size_t line_no_ = 0;
};

std::ofstream open_output(const std::string& path);
std::int64_t parse_int(std::string_view text, std::string_view what);
double parse_double(std::string_view text, std::string_view what);

}  // namespace absplit::csv
