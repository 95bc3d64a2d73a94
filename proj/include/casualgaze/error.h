#ifndef CASUALGAZE_ERROR_H_
#define CASUALGAZE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace casualgaze {

enum class ErrorCode {
  kZeroDirection,
  kOutOfRange,
  kNonPositiveDistance,
  kInsufficientData,
  kDegenerateDesign,
  kEmptyBuffer,
  kNonMonotonicTimestamp,
  kInvalidProfile,
  kInvalidConfig,
  kLengthMismatch,
  kEmptyInput,
  kParseError,
  kSchemaVersionMismatch,
  kValidationError,
  kNotFound,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this type. The code is stable and
// is what the CLI maps onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace casualgaze

#endif  // CASUALGAZE_ERROR_H_
