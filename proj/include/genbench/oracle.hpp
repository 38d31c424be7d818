#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "genbench/datasets.hpp"
#include "genbench/grid.hpp"

namespace genbench {

enum class MatrixRole { GreenA, BasisB, OrthoU, WeightsW, StencilL };

std::string role_name(MatrixRole role);

/// Dense matrix tagged with what it represents.
struct OperatorMatrix {
  Eigen::MatrixXd data;
  MatrixRole role = MatrixRole::WeightsW;

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }
};

/// Interpolation basis psi_j used to discretize the Green's operator.
enum class GreenBasis { HatLinear, PiecewiseConstant };

/// G(s, x) for -u'' = f on (0, 1) with homogeneous Dirichlet conditions.
double greens_value(double s, double x);

/// A_ij = (1/k) * integral of G(x_i, s) psi_j(s) over [0, 1], integrated exactly.
OperatorMatrix assemble_green_matrix(const Grid& grid, GreenBasis basis = GreenBasis::HatLinear,
                                     double k = 1.0);

/// Interior-node FEM operators: K = (k/dx) tridiag(-1, 2, -1), M = (dx/6) tridiag(1, 4, 1).
Eigen::MatrixXd stiffness_matrix(const Grid& grid, double k = 1.0);
Eigen::MatrixXd mass_matrix(const Grid& grid);

/// Columns are the family's basis functions evaluated at the interior nodes.
OperatorMatrix assemble_basis(Family family, int p, const Grid& grid);

/// Left singular vectors of B whose singular values exceed rel_tol * sigma_max.
OperatorMatrix orthonormal_range(const OperatorMatrix& basis, double rel_tol = 1e-12);

Eigen::MatrixXd range_projector(const OperatorMatrix& ortho);

/// W* = A U U^T + W0 (I - U U^T).
OperatorMatrix predict_w_star(const OperatorMatrix& green, const OperatorMatrix& ortho,
                              const Eigen::MatrixXd& w0);

/// Exact solution operator restricted to span(B): S B^+, where column j of S
/// is the closed-form solution for basis function j. For FEM this is A itself.
OperatorMatrix subspace_green_matrix(Family family, int p, const Grid& grid, double k = 1.0);

/// Green's matrix that the family's samples satisfy exactly:
/// A_hat (I - P) + S B^+, with P the projector onto span(B).
OperatorMatrix consistent_green_matrix(Family family, int p, const Grid& grid, double k = 1.0,
                                       GreenBasis basis = GreenBasis::HatLinear);

/// Which coefficients are drawn iid when predicting the fitted FD parameter.
enum class FdSampling {
  /// f = sum_{m<=p} c_m x^m; the forcing coefficients are iid.
  ForcingMonomials,
  /// u = sum_{n<=p+2} c_n x^n; the solution coefficients are iid.
  SolutionMonomials,
};

struct FdErrorLaw {
  int q = 2;
  int p = 0;
  double dx = 0.0;
  double predicted_w = 0.0;
  /// Signed (w - k) / k.
  double relative_error = 0.0;
};

/// Expected-loss minimizer for w * FD_q(u) = -f over polynomial forcing of
/// degree p, integrated exactly over [0, 1].
FdErrorLaw predict_fd_w(int p, int q, double dx, double k,
                        FdSampling sampling = FdSampling::ForcingMonomials);

/// Same, with explicit second moments E[c_m^2] for each forcing monomial x^m.
FdErrorLaw predict_fd_w(std::span<const double> forcing_moments, int q, double dx, double k);

/// Published closed form of (w - k) / k for the three-point stencil.
double fd_error_p2(double dx);

/// Coefficients (lowest degree first) of FD_q applied to x^n, exact in dx.
std::vector<double> fd_of_monomial(int n, int q, double dx);

/// sqrt(M - p) * (||W0||_F / ||A||_F + 1).
double error_bounds(const Eigen::MatrixXd& w0, const Eigen::MatrixXd& green, int p, int m);

/// ||(W0 - A)(I - U U^T)||_F / ||A||_F.
double tight_error(const Eigen::MatrixXd& green, const OperatorMatrix& ortho,
                   const Eigen::MatrixXd& w0);

double relative_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& reference);

}  // namespace genbench
