#pragma once

#include <stdexcept>
#include <string>

namespace approxflow {

enum class ErrorKind {
  Usage,       // bad arguments or violated preconditions
  Input,       // missing or unreadable input, empty input
  Pipeline,    // a transform failed or produced records of the wrong shape
  Infeasible,  // error-bound targets cannot be met
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

/// A transform stage failed. `stage()` names the offending stage, e.g.
/// "op[1] flatMap(tokenize)".
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error(ErrorKind::Pipeline, stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace approxflow
