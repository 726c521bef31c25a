#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "swapsim/error.hpp"

namespace swapsim {

// Minimal reader for the versioned, unquoted CSV files the tool writes.
class CsvReader {
 public:
  CsvReader(const std::string& path, const std::string& version_line, const std::string& header);

  // False at end of file. Throws a parse error naming the line on a bad row.
  bool next(std::vector<std::string>& fields, std::size_t expected);

  std::optional<std::string> version_field(const std::string& key) const;

  double to_double(const std::string& s, const char* column) const;
  std::uint64_t to_u64(const std::string& s, const char* column) const;
  std::int64_t to_i64(const std::string& s, const char* column) const;

  [[noreturn]] void fail(const std::string& what, ErrorKind kind = ErrorKind::Parse) const;
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::string version_;
  std::size_t line_ = 0;
};

std::vector<std::string> split_csv(const std::string& line);

}  // namespace swapsim
