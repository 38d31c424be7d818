#include "genbench/grid.hpp"

#include <string>

#include "genbench/error.hpp"

namespace genbench {

Grid make_grid(int n_grid) {
  if (n_grid < 2)
    throw Error(ErrorKind::InvalidGrid, "n_grid must be at least 2, got " + std::to_string(n_grid));
  Grid g;
  g.n_grid = n_grid;
  g.dx = 1.0 / n_grid;
  g.nodes.resize(n_grid - 1);
  // i / n_grid rather than i * dx so the last node is exactly 1 - dx where representable.
  for (int i = 1; i < n_grid; ++i) g.nodes[i - 1] = static_cast<double>(i) / n_grid;
  return g;
}

}  // namespace genbench
