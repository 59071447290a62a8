#include "biasbench/errors.hpp"

namespace biasbench {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::NonBinaryLabel: return "NonBinaryLabel";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::TooFewItems: return "TooFewItems";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::InsufficientClassExamples: return "InsufficientClassExamples";
    case ErrorCode::MissingExemplars: return "MissingExemplars";
    case ErrorCode::TemplateSlotUnfilled: return "TemplateSlotUnfilled";
    case ErrorCode::ExhaustedRetries: return "ExhaustedRetries";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::MissingApiKey: return "MissingApiKey";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MixedStrategies: return "MixedStrategies";
    case ErrorCode::CorruptJournal: return "CorruptJournal";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace biasbench
