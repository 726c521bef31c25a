#include "swapsim/csv.hpp"

#include <charconv>
#include <sstream>

namespace swapsim {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

CsvReader::CsvReader(const std::string& path, const std::string& version_line, const std::string& header)
    : path_(path), in_(path) {
  require(static_cast<bool>(in_), ErrorKind::InvalidParameter, "cannot open " + path);
  std::string l;
  if (!std::getline(in_, l)) fail("missing version line");
  ++line_;
  if (!l.empty() && l.back() == '\r') l.pop_back();
  if (l.rfind(version_line, 0) != 0) fail("expected version line '" + version_line + "'");
  version_ = l;
  if (!std::getline(in_, l)) fail("missing header");
  ++line_;
  if (!l.empty() && l.back() == '\r') l.pop_back();
  if (l != header) fail("expected header '" + header + "'");
}

bool CsvReader::next(std::vector<std::string>& fields, std::size_t expected) {
  std::string l;
  while (std::getline(in_, l)) {
    ++line_;
    if (!l.empty() && l.back() == '\r') l.pop_back();
    if (l.empty()) continue;
    fields = split_csv(l);
    if (fields.size() != expected) {
      fail("expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
    }
    return true;
  }
  return false;
}

std::optional<std::string> CsvReader::version_field(const std::string& key) const {
  std::istringstream ss(version_);
  std::string tok;
  while (ss >> tok) {
    if (tok.rfind(key + "=", 0) == 0) return tok.substr(key.size() + 1);
  }
  return std::nullopt;
}

void CsvReader::fail(const std::string& what, ErrorKind kind) const {
  throw Error(kind, path_ + ":" + std::to_string(line_) + ": " + what);
}

double CsvReader::to_double(const std::string& s, const char* column) const {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(std::string("bad number in ") + column);
  return v;
}

std::uint64_t CsvReader::to_u64(const std::string& s, const char* column) const {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(std::string("bad integer in ") + column);
  return v;
}

std::int64_t CsvReader::to_i64(const std::string& s, const char* column) const {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(std::string("bad integer in ") + column);
  return v;
}

}  // namespace swapsim
