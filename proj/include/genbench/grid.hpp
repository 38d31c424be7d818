#pragma once

#include <Eigen/Dense>

namespace genbench {

/// Uniform discretization of [0, 1]. Only the M = n_grid - 1 interior nodes
/// carry data; the boundary values are identically zero.
struct Grid {
  int n_grid = 0;
  double dx = 0.0;
  Eigen::VectorXd nodes;

  int interior_size() const { return n_grid - 1; }
  bool operator==(const Grid& other) const { return n_grid == other.n_grid; }
};

/// Throws Error(InvalidGrid) when n_grid < 2.
Grid make_grid(int n_grid);

}  // namespace genbench
