#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace colopack {

enum class ErrorCode {
  kIo,
  kParse,
  kDanglingReference,
  kDuplicateId,
  kInvalidValue,
  kOutOfOrder,
  kEmptyInput,
  kMissingProfile,
  kMissingEntry,
  kUnsatisfiable,
  kTooLarge,
  kUsage,
};

// Stable machine-readable name, e.g. "dangling_reference".
std::string_view error_code_name(ErrorCode code);

// Process exit status used by the CLI for each code.
int error_exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace colopack
