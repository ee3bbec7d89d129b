#pragma once

#include <stdexcept>
#include <string>

namespace maskmatch {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kDegenerateShape,
  kNonFinite,
  kBadMagic,
  kUnsupportedVersion,
  kUnsupportedDtype,
  kTruncated,
  kNotFound,
  kIo,
  kMissingPrerequisite,
  kInvariant,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; `code()` lets callers (the CLI in
// particular) map failures onto exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace maskmatch
