#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace genbench {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  InvalidGrid,
  InvalidSpec,
  WrongSolver,
  Solver,
  DegenerateNormalization,
  Domain,
  RankZero,
  ShapeMismatch,
  UnsupportedStencil,
  DegenerateFit,
  Divergence,
  Incompatible,
  AllRunsDiverged,
  Io,
  Usage,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// 0 ok, 1 numerical/training failure, 2 usage or I/O.
int exit_code_for(ErrorKind kind);

}  // namespace genbench
