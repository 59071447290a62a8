#pragma once

#include <stdexcept>
#include <string>

namespace biasbench {

enum class ErrorCode {
  // dataset
  MissingField,
  NonBinaryLabel,
  EmptyText,
  MalformedRecord,
  TooFewItems,
  SizeMismatch,
  // prompt engine
  InsufficientClassExamples,
  MissingExemplars,
  TemplateSlotUnfilled,
  // gateway
  ExhaustedRetries,
  AuthError,
  MalformedResponse,
  MissingApiKey,
  // metrics
  LengthMismatch,
  EmptyInput,
  MixedStrategies,
  // runner
  CorruptJournal,
  ConfigMismatch,
  InvalidConfig,
  IoError,
};

const char* error_code_name(ErrorCode code);

class HarnessError : public std::runtime_error {
 public:
  HarnessError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace biasbench
