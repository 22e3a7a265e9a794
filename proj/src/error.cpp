#include "colopack/error.hpp"

namespace colopack {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kDanglingReference: return "dangling_reference";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kInvalidValue: return "invalid_value";
    case ErrorCode::kOutOfOrder: return "out_of_order";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kMissingProfile: return "missing_profile";
    case ErrorCode::kMissingEntry: return "missing_entry";
    case ErrorCode::kUnsatisfiable: return "unsatisfiable";
    case ErrorCode::kTooLarge: return "too_large";
    case ErrorCode::kUsage: return "usage";
  }
  return "unknown";
}

int error_exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage: return 2;
    case ErrorCode::kIo: return 3;
    case ErrorCode::kParse: return 4;
    case ErrorCode::kDanglingReference:
    case ErrorCode::kDuplicateId:
    case ErrorCode::kInvalidValue:
    case ErrorCode::kOutOfOrder:
    case ErrorCode::kEmptyInput: return 5;
    case ErrorCode::kMissingProfile:
    case ErrorCode::kMissingEntry: return 6;
    case ErrorCode::kUnsatisfiable:
    case ErrorCode::kTooLarge: return 7;
  }
  return 1;
}

}  // namespace colopack
