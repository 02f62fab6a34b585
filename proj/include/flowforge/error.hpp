#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace flowforge {

/// Machine-readable error categories shared by every module. The gateway maps
/// each one to an HTTP status and a snake_case code string.
enum class Errc {
  kInvalidArgument,
  kNotFound,
  kDuplicateService,
  kInvalidDescriptor,
  kInUse,
  kSyntaxError,
  kUnknownService,
  kKindMismatch,
  kMissingRequiredParam,
  kBindingTypeError,
  kInvalidWorkflow,
  kDuplicateWorkflow,
  kInvalidOffset,
  kGroupBusy,
  kAlreadyDeployed,
  kNotRunning,
  kOperatorInitError,
  kOperatorRuntimeError,
  kColumnNotFound,
  kColumnTypeError,
  kKTooLarge,
  kNonNumericFeature,
  kInvalidSize,
  kIoError,
  kSchemaMismatch,
  kExecutorError,
  kTooFewSamples,
  kBudgetTooSmall,
  kInvalidSpace,
  kUnreachableSource,
  kUnsupportedKind,
  kUnknownColumn,
  kTypeError,
  kEmptyFrame,
  kUnauthorized,
  kBindError,
  kInternal,
};

std::string_view errc_code(Errc code);
int errc_http_status(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  Errc code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

 private:
  Errc code_;
  nlohmann::json details_;
};

}  // namespace flowforge
