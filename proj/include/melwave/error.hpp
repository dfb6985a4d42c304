// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace melwave {

enum class ErrorKind {
  kInvalidConfig,
  kInvalidInput,
  kInvalidStats,
  kNumeric,
  kUnsupportedFormat,
  kCorruptFile,
  kTrainingFailure,
  kEmptyOutput,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidConfig: return "invalid-config";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kInvalidStats: return "invalid-stats";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kUnsupportedFormat: return "unsupported-format";
    case ErrorKind::kCorruptFile: return "corrupt-file";
    case ErrorKind::kTrainingFailure: return "training-failure";
    case ErrorKind::kEmptyOutput: return "empty-output";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace melwave
