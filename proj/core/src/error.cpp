#include "sieveate/error.hpp"

namespace sieveate {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DegenerateDesign: return "degenerate-design";
    case ErrorCode::RankDeficient: return "rank-deficient";
    case ErrorCode::DegeneratePropensity: return "degenerate-propensity";
    case ErrorCode::EmptySample: return "empty-sample";
    case ErrorCode::SelectionFailure: return "selection-failure";
    case ErrorCode::BootstrapInstability: return "bootstrap-instability";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

}  // namespace sieveate
