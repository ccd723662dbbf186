#pragma once

#include <stdexcept>
#include <string>

namespace survregime {

enum class ErrorCode {
  schema,
  parse,
  validation,
  degenerate_weights,
  positivity,
  truncation,
  separation,
  singular_design,
  no_convergence,
  degenerate_direction,
  search_failure,
  bootstrap_failure,
  study_failure,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map error classes to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// 1 = input problems, 2 = model fitting, 3 = estimation/search.
int exit_code(ErrorCode code);

}  // namespace survregime
