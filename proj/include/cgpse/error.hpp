#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cgpse {

/// Coarse error classes; the CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  io = 2,
  format = 3,
  invalid_argument = 4,
  numerical = 5,
  config = 6,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) {
  throw Error(c, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCategory::invalid_argument, what);
}

}  // namespace cgpse
