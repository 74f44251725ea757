#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mediaflow {

enum class ErrorCode {
  EmptyPayload,
  StorageFailure,
  NotFound,
  UnknownAsset,
  UnknownWorkflow,
  InvalidDefinition,
  UnsupportedMediaKind,
  UnsupportedParameters,
  OperatorFailure,
  OperatorTimeout,
  MalformedContainer,
  MalformedImage,
  ZeroDimension,
  TooSmall,
  DatasetTooSmall,
  NoPositives,
  DegenerateBox,
  EmptyQuery,
  BodyTooLarge,
  PayloadTooLarge,
  KindInUse,
  InvalidLabel,
  InvalidInput,
};

// Machine-readable name, e.g. UNKNOWN_WORKFLOW. Used verbatim by the gateway.
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mediaflow
