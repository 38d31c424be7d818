#include "genbench/error.hpp"

namespace genbench {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidGrid: return "invalid-grid";
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::WrongSolver: return "wrong-solver";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::DegenerateNormalization: return "degenerate-normalization";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::RankZero: return "rank-zero";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::UnsupportedStencil: return "unsupported-stencil";
    case ErrorKind::DegenerateFit: return "degenerate-fit";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Incompatible: return "incompatible";
    case ErrorKind::AllRunsDiverged: return "all-runs-diverged";
    case ErrorKind::Io: return "io";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::Usage:
    case ErrorKind::InvalidGrid:
    case ErrorKind::InvalidSpec:
    case ErrorKind::Incompatible:
      return 2;
    default:
      return 1;
  }
}

}  // namespace genbench
