#pragma once

#include <stdexcept>
#include <string>

namespace swapsim {

enum class ErrorKind {
  InvalidParameter,
  InvalidState,
  Parse,
  Reference,
  Routing,
  Scheduling,
  Capacity,
  Oversize,
  TranslationFault,
  InvariantViolation,
  Config,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace swapsim
