#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epolis {

// Machine-readable failure classes; the service maps these onto its error codes.
enum class ErrorCode {
  Syntax,
  Validation,
  UnknownId,
  WrongPhase,
  InvalidChoice,
  Io,
  Corrupt,
  Runtime,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct SourcePos {
  int line = 0;
  int column = 0;
};

// Raised by the rule-language front end; always carries the offending position.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, SourcePos pos)
      : Error(ErrorCode::Syntax, format(what, pos)), message_(what), pos_(pos) {}

  SourcePos pos() const noexcept { return pos_; }
  const std::string& message() const noexcept { return message_; }

 private:
  static std::string format(const std::string& what, SourcePos pos) {
    return std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + what;
  }
  std::string message_;
  SourcePos pos_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Syntax: return "syntax";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::UnknownId: return "unknown-id";
    case ErrorCode::WrongPhase: return "wrong-phase";
    case ErrorCode::InvalidChoice: return "invalid-choice";
    case ErrorCode::Io: return "io";
    case ErrorCode::Corrupt: return "corrupt";
    case ErrorCode::Runtime: return "runtime";
  }
  return "runtime";
}

}  // namespace epolis
