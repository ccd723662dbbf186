#include "survregime/errors.hpp"

namespace survregime {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::schema: return "schema";
    case ErrorCode::parse: return "parse";
    case ErrorCode::validation: return "validation";
    case ErrorCode::degenerate_weights: return "degenerate_weights";
    case ErrorCode::positivity: return "positivity";
    case ErrorCode::truncation: return "truncation";
    case ErrorCode::separation: return "separation";
    case ErrorCode::singular_design: return "singular_design";
    case ErrorCode::no_convergence: return "no_convergence";
    case ErrorCode::degenerate_direction: return "degenerate_direction";
    case ErrorCode::search_failure: return "search_failure";
    case ErrorCode::bootstrap_failure: return "bootstrap_failure";
    case ErrorCode::study_failure: return "study_failure";
  }
  return "unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::schema:
    case ErrorCode::parse:
    case ErrorCode::validation:
      return 1;
    case ErrorCode::separation:
    case ErrorCode::singular_design:
    case ErrorCode::no_convergence:
      return 2;
    default:
      return 3;
  }
}

}  // namespace survregime
