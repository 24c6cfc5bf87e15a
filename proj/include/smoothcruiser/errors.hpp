#pragma once

#include <stdexcept>
#include <string>

namespace smoothcruiser {

// Error categories. Validation errors (bad user input or configuration) map to
// CLI exit code 2; numeric/internal errors map to exit code 1.
enum class errc {
  invalid_argument,
  invalid_configuration,
  unsupported_operation,
  numeric_failure,
  internal_logic,
  infeasible_accuracy,
  degenerate_run,
};

inline const char* to_string(errc c) {
  switch (c) {
    case errc::invalid_argument: return "invalid-argument";
    case errc::invalid_configuration: return "invalid-configuration";
    case errc::unsupported_operation: return "unsupported-operation";
    case errc::numeric_failure: return "numeric-failure";
    case errc::internal_logic: return "internal-logic";
    case errc::infeasible_accuracy: return "infeasible-accuracy";
    case errc::degenerate_run: return "degenerate-run";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  errc code() const noexcept { return code_; }
  const char* code_str() const noexcept { return to_string(code_); }

  // True for errors caused by bad input rather than by a bug or a numeric
  // breakdown.
  bool is_validation_error() const noexcept {
    switch (code_) {
      case errc::invalid_argument:
      case errc::invalid_configuration:
      case errc::unsupported_operation:
      case errc::infeasible_accuracy:
      case errc::degenerate_run:
        return true;
      default:
        return false;
    }
  }

 private:
  errc code_;
};

}  // namespace smoothcruiser
