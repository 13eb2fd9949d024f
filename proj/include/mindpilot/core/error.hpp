#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mindpilot {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  degenerate_vector,
  non_finite,
  ill_conditioned,
  not_found,
  conflict,
  io,
  evaluation_failed,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::degenerate_vector: return "degenerate_vector";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::ill_conditioned: return "ill_conditioned";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::io: return "io";
    case ErrorCode::evaluation_failed: return "evaluation_failed";
  }
  return "unknown";
}

/// Exception type used across the library; `code()` is stable and machine-readable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace mindpilot
