#include "absplit/csv.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>

#include "absplit/types.hpp"

namespace absplit::csv {

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (quoted) fail(ErrorCode::Parse, "unterminated quoted CSV field");
  fields.push_back(std::move(current));
  return fields;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

Reader::Reader(const std::string& path) : path_(path), in_(path) {
  if (!in_) fail(ErrorCode::Io, "cannot open " + path);
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.empty() || line == "\r") continue;
    header_ = split_line(line);
    return;
  }
  fail(ErrorCode::Parse, path + ": missing header row");
}

std::ptrdiff_t Reader::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

std::size_t Reader::column(std::string_view name) const {
  const auto idx = find_column(name);
  if (idx < 0) fail(ErrorCode::Parse, path_ + ": missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(idx);
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.empty() || line == "\r") continue;
    try {
      fields = split_line(line);
    } catch (const Error& e) {
      fail(ErrorCode::Parse, path_ + ":" + std::to_string(line_no_) + ": " + e.what());
    }
    if (fields.size() != header_.size())
      fail(ErrorCode::Parse, path_ + ":" + std::to_string(line_no_) + ": expected " +
                                 std::to_string(header_.size()) + " fields, got " + std::to_string(fields.size()));
    return true;
  }
  return false;
}

std::ofstream open_output(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  return out;
}

std::int64_t parse_int(std::string_view text, std::string_view what) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    fail(ErrorCode::Parse, "invalid integer for " + std::string(what) + ": '" + std::string(text) + "'");
  return value;
}

double parse_double(std::string_view text, std::string_view what) {
  // gcc 11 lacks floating-point from_chars.
  std::string owned(text);
  char* end = nullptr;
  const double value = std::strtod(owned.c_str(), &end);
  if (owned.empty() || end != owned.c_str() + owned.size())
    fail(ErrorCode::Parse, "invalid number for " + std::string(what) + ": '" + owned + "'");
  return value;
}

}  // namespace absplit::csv
