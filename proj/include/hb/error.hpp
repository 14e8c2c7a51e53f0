#pragma once

#include <stdexcept>
#include <string>

namespace hb {

// Exit codes shared by the library's error classes and the CLI.
enum class ErrorCode : int {
  kAssertion = 1,
  kParse = 2,
  kResourceCap = 3,
  kPrecondition = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(ErrorCode::kParse, what) {}
};

struct CapExceeded : Error {
  explicit CapExceeded(const std::string& what) : Error(ErrorCode::kResourceCap, what) {}
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what) : Error(ErrorCode::kPrecondition, what) {}
};

// Internal consistency failure (a certified property did not hold).
struct AssertionFailure : Error {
  explicit AssertionFailure(const std::string& what) : Error(ErrorCode::kAssertion, what) {}
};

}  // namespace hb
