#pragma once

#include <stdexcept>
#include <string>

namespace rlid {

// Every failure raised by the library derives from Error. The category decides
// the process exit code used by the command-line tool.
enum class ErrorCategory {
  kUsage = 1,    // bad arguments or configuration
  kData = 2,     // unreadable, malformed or inconsistent files and records
  kNumeric = 3,  // non-finite loss, gradient or parameter
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::kUsage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::kData, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::kNumeric, what) {}
};

}  // namespace rlid
