#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace archheal {

enum class ErrorCode {
  Unknown,
  Lookup,
  KindMismatch,
  InterfaceMismatch,
  CrossShop,
  Validation,
  Parse,
  Staleness,
  Generation,
  Evaluation,
  Effect,
  A2Violation,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

class LookupError : public Error {
public:
  explicit LookupError(const std::string& message) : Error(ErrorCode::Lookup, message) {}
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& message, ErrorCode code = ErrorCode::Validation)
      : Error(code, message) {}
};

class ParseError : public Error {
public:
  explicit ParseError(const std::string& message) : Error(ErrorCode::Parse, message) {}
};

class StalenessError : public Error {
public:
  explicit StalenessError(const std::string& message) : Error(ErrorCode::Staleness, message) {}
};

class GenerationError : public Error {
public:
  explicit GenerationError(const std::string& message) : Error(ErrorCode::Generation, message) {}
};

class EvalError : public Error {
public:
  explicit EvalError(const std::string& message) : Error(ErrorCode::Evaluation, message) {}
};

class EffectError : public Error {
public:
  explicit EffectError(const std::string& message) : Error(ErrorCode::Effect, message) {}
};

// Raised when an applied rule fails to invalidate the negative match it is
// linked to. Signals a broken rule library, not a runtime condition.
class A2ViolationError : public Error {
public:
  A2ViolationError(std::string ruleId, std::string matchKey)
      : Error(ErrorCode::A2Violation,
              "rule '" + ruleId + "' left its linked negative match intact: " + matchKey),
        ruleId_(std::move(ruleId)),
        matchKey_(std::move(matchKey)) {}

  const std::string& rule_id() const noexcept { return ruleId_; }
  const std::string& match_key() const noexcept { return matchKey_; }

private:
  std::string ruleId_;
  std::string matchKey_;
};

}  // namespace archheal
