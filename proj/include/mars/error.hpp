#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mars {

enum class ErrorCategory {
  kInvalidInput,
  kIo,
  kMissingPrerequisite,
  kConfigMismatch,
  kNumeric,
  kUsage,
};

constexpr std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kInvalidInput: return "invalid-input";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kMissingPrerequisite: return "missing-prerequisite";
    case ErrorCategory::kConfigMismatch: return "config-mismatch";
    case ErrorCategory::kNumeric: return "numeric";
    case ErrorCategory::kUsage: return "usage";
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

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) { throw Error(c, what); }

inline void require(bool cond, const std::string& what,
                    ErrorCategory c = ErrorCategory::kInvalidInput) {
  if (!cond) throw Error(c, what);
}

}  // namespace mars
