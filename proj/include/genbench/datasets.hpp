#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "genbench/binary_io.hpp"
#include "genbench/grid.hpp"
#include "genbench/rng.hpp"

namespace genbench {

enum class Family { Polynomial, Sine, Cosine, FemPiecewiseLinear };

std::string family_name(Family family);
/// Accepts "polynomial"/"poly", "sine", "cosine"/"cos", "fem".
std::optional<Family> parse_family(const std::string& name);

/// Symbolic description of one sampled forcing function.
///
/// coefficients holds monomial coefficients (Polynomial, length p+1),
/// series coefficients c_1..c_p (Sine/Cosine), or nodal values at all
/// n_grid+1 nodes including the two boundary nodes (FemPiecewiseLinear).
struct ForcingSpec {
  Family family = Family::Polynomial;
  int order_p = 0;
  std::vector<double> coefficients;
  double k = 1.0;
};

struct Sample {
  Eigen::VectorXd f;
  Eigen::VectorXd u;
};

/// N paired nodal vectors, stored row-wise (row n is sample n).
struct Dataset {
  Grid grid;
  Family family = Family::Polynomial;
  int order_p = 0;
  std::uint64_t seed = 0;
  double norm_scale = 1.0;
  double k = 1.0;
  RowMatrix f;
  RowMatrix u;

  std::size_t size() const { return static_cast<std::size_t>(f.rows()); }
  Sample sample(std::size_t n) const;
};

/// Expands prod_i (x - r_i) into monomial coefficients, lowest degree first.
std::vector<double> polynomial_from_roots(std::span<const double> roots);
double evaluate_polynomial(std::span<const double> coefficients, double x);

/// Polynomial: p roots ~ U[-1, 2], expanded. Sine/Cosine: c_i ~ U[-1, 1].
/// FEM: interior nodal values ~ N(0, 1); the two boundary values are zero.
ForcingSpec sample_forcing(Family family, int p, const Grid& grid, Rng& rng, double k = 1.0);
ForcingSpec sample_forcing(Family family, int p, const Grid& grid, std::uint64_t seed,
                           double k = 1.0);

/// Exact nodal solution for the Polynomial, Sine and Cosine families.
Sample solve_closed_form(const ForcingSpec& spec, const Grid& grid);

/// Linear finite elements with consistent load; nodally exact for
/// piecewise-linear forcing.
Sample solve_fem(const ForcingSpec& spec, const Grid& grid);

/// Thomas algorithm for a tridiagonal system. sub[0] and super[n-1] are unused.
/// Throws Error(Solver) on a zero pivot.
Eigen::VectorXd solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                  std::span<const double> super, std::span<const double> rhs);

/// Sample n is drawn from Rng::substream(seed, n), so the result does not
/// depend on `jobs`.
Dataset generate_dataset(Family family, int p, int n_grid, std::size_t n_examples,
                         std::uint64_t seed, double k = 1.0, unsigned jobs = 1);

/// Scales every (f, u) pair by 1 / mean_n ||u_n||_2. norm_scale accumulates.
Dataset normalize(Dataset dataset);

inline constexpr int kDatasetSchemaVersion = 1;

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace genbench
