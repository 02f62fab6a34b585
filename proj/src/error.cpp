#include "flowforge/error.hpp"

namespace flowforge {

std::string_view errc_code(Errc code) {
  switch (code) {
    case Errc::kInvalidArgument: return "invalid_argument";
    case Errc::kNotFound: return "not_found";
    case Errc::kDuplicateService: return "duplicate_service";
    case Errc::kInvalidDescriptor: return "invalid_descriptor";
    case Errc::kInUse: return "in_use";
    case Errc::kSyntaxError: return "syntax_error";
    case Errc::kUnknownService: return "unknown_service";
    case Errc::kKindMismatch: return "kind_mismatch";
    case Errc::kMissingRequiredParam: return "missing_required_param";
    case Errc::kBindingTypeError: return "binding_type_error";
    case Errc::kInvalidWorkflow: return "invalid_workflow";
    case Errc::kDuplicateWorkflow: return "duplicate_workflow";
    case Errc::kInvalidOffset: return "invalid_offset";
    case Errc::kGroupBusy: return "group_busy";
    case Errc::kAlreadyDeployed: return "already_deployed";
    case Errc::kNotRunning: return "not_running";
    case Errc::kOperatorInitError: return "operator_init_error";
    case Errc::kOperatorRuntimeError: return "operator_runtime_error";
    case Errc::kColumnNotFound: return "column_not_found";
    case Errc::kColumnTypeError: return "column_type_error";
    case Errc::kKTooLarge: return "k_too_large";
    case Errc::kNonNumericFeature: return "non_numeric_feature";
    case Errc::kInvalidSize: return "invalid_size";
    case Errc::kIoError: return "io_error";
    case Errc::kSchemaMismatch: return "schema_mismatch";
    case Errc::kExecutorError: return "executor_error";
    case Errc::kTooFewSamples: return "too_few_samples";
    case Errc::kBudgetTooSmall: return "budget_too_small";
    case Errc::kInvalidSpace: return "invalid_space";
    case Errc::kUnreachableSource: return "unreachable_source";
    case Errc::kUnsupportedKind: return "unsupported_kind";
    case Errc::kUnknownColumn: return "unknown_column";
    case Errc::kTypeError: return "type_error";
    case Errc::kEmptyFrame: return "empty_frame";
    case Errc::kUnauthorized: return "unauthorized";
    case Errc::kBindError: return "bind_error";
    case Errc::kInternal: return "internal";
  }
  return "internal";
}

int errc_http_status(Errc code) {
  switch (code) {
    case Errc::kNotFound:
      return 404;
    case Errc::kDuplicateService:
    case Errc::kDuplicateWorkflow:
    case Errc::kInUse:
    case Errc::kAlreadyDeployed:
    case Errc::kNotRunning:
    case Errc::kGroupBusy:
      return 409;
    case Errc::kUnknownService:
    case Errc::kKindMismatch:
    case Errc::kMissingRequiredParam:
    case Errc::kBindingTypeError:
    case Errc::kInvalidWorkflow:
    case Errc::kOperatorInitError:
    case Errc::kUnknownColumn:
    case Errc::kTypeError:
    case Errc::kColumnNotFound:
    case Errc::kColumnTypeError:
    case Errc::kKTooLarge:
    case Errc::kNonNumericFeature:
    case Errc::kTooFewSamples:
    case Errc::kBudgetTooSmall:
    case Errc::kInvalidSpace:
    case Errc::kUnreachableSource:
    case Errc::kUnsupportedKind:
    case Errc::kEmptyFrame:
      return 422;
    case Errc::kUnauthorized:
      return 401;
    case Errc::kInvalidArgument:
    case Errc::kInvalidDescriptor:
    case Errc::kSyntaxError:
    case Errc::kInvalidOffset:
    case Errc::kInvalidSize:
    case Errc::kSchemaMismatch:
      return 400;
    case Errc::kOperatorRuntimeError:
    case Errc::kIoError:
    case Errc::kExecutorError:
    case Errc::kBindError:
    case Errc::kInternal:
      return 500;
  }
  return 500;
}

}  // namespace flowforge
