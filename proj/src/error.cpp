#include "mediaflow/error.hpp"

namespace mediaflow {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyPayload: return "EMPTY_PAYLOAD";
    case ErrorCode::StorageFailure: return "STORAGE_FAILURE";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::UnknownAsset: return "UNKNOWN_ASSET";
    case ErrorCode::UnknownWorkflow: return "UNKNOWN_WORKFLOW";
    case ErrorCode::InvalidDefinition: return "INVALID_DEFINITION";
    case ErrorCode::UnsupportedMediaKind: return "UNSUPPORTED_MEDIA_KIND";
    case ErrorCode::UnsupportedParameters: return "UNSUPPORTED_PARAMETERS";
    case ErrorCode::OperatorFailure: return "OPERATOR_FAILURE";
    case ErrorCode::OperatorTimeout: return "OPERATOR_TIMEOUT";
    case ErrorCode::MalformedContainer: return "MALFORMED_CONTAINER";
    case ErrorCode::MalformedImage: return "MALFORMED_IMAGE";
    case ErrorCode::ZeroDimension: return "ZERO_DIMENSION";
    case ErrorCode::TooSmall: return "TOO_SMALL";
    case ErrorCode::DatasetTooSmall: return "DATASET_TOO_SMALL";
    case ErrorCode::NoPositives: return "NO_POSITIVES";
    case ErrorCode::DegenerateBox: return "DEGENERATE_BOX";
    case ErrorCode::EmptyQuery: return "EMPTY_QUERY";
    case ErrorCode::BodyTooLarge: return "BODY_TOO_LARGE";
    case ErrorCode::PayloadTooLarge: return "PAYLOAD_TOO_LARGE";
    case ErrorCode::KindInUse: return "KIND_IN_USE";
    case ErrorCode::InvalidLabel: return "INVALID_LABEL";
    case ErrorCode::InvalidInput: return "INVALID_INPUT";
  }
  return "INTERNAL";
}

}  // namespace mediaflow
