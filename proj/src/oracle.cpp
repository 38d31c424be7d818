#include "genbench/oracle.hpp"

#include <cmath>
#include <numbers>

#include "genbench/error.hpp"
#include "genbench/keyvalue.hpp"

namespace genbench {

namespace {

constexpr double kPi = std::numbers::pi;

void require_domain(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0))
    throw Error(ErrorKind::Domain, std::string(name) + " = " + format_double(v) + " is outside [0, 1]");
}

// Simpson's rule; exact for the piecewise quadratic integrands used here.
template <class Fn>
double simpson(Fn&& g, double a, double b) {
  return (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b));
}

// Symmetric stencil weights w_s for offsets s = 0, 1, 2 (w_{-s} = w_s), in units of 1/dx^2.
std::vector<double> stencil_half_weights(int q) {
  if (q == 2) return {-2.0, 1.0};
  if (q == 4) return {-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0};
  throw Error(ErrorKind::UnsupportedStencil, "stencil order q = " + std::to_string(q) +
                                                 " is not supported (use 2 or 4)");
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// integral over [0, 1] of P(x) Q(x) for coefficient vectors.
double integrate_product(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < q.size(); ++b)
      acc += p[a] * q[b] / static_cast<double>(a + b + 1);
  return acc;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& b, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = rel_tol * (sv.size() ? sv[0] : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Closed-form solution at the nodes for each basis function of the family.
Eigen::MatrixXd basis_solutions(Family family, int p, const Grid& grid, double k) {
  const Eigen::Index m = grid.interior_size();
  const auto& x = grid.nodes;
  switch (family) {
    case Family::Polynomial: {
      Eigen::MatrixXd s(m, p + 1);
      for (int j = 0; j <= p; ++j) {
        const double denom = (j + 1.0) * (j + 2.0) * k;
        for (Eigen::Index i = 0; i < m; ++i) s(i, j) = (x[i] - std::pow(x[i], j + 2)) / denom;
      }
      return s;
    }
    case Family::Sine:
    case Family::Cosine: {
      Eigen::MatrixXd s(m, p);
      for (int j = 1; j <= p; ++j) {
        const double scale = 1.0 / (k * j * j * kPi * kPi);
        const double end = (j % 2 == 1) ? -1.0 : 1.0;
        for (Eigen::Index i = 0; i < m; ++i) {
          if (family == Family::Sine)
            s(i, j - 1) = std::sin(j * kPi * x[i]) * scale;
          else
            s(i, j - 1) = (std::cos(j * kPi * x[i]) - (1.0 - x[i]) - end * x[i]) * scale;
        }
      }
      return s;
    }
    case Family::FemPiecewiseLinear:
      break;
  }
  return assemble_green_matrix(grid, GreenBasis::HatLinear, k).data;
}

}  // namespace

std::string role_name(MatrixRole role) {
  switch (role) {
    case MatrixRole::GreenA: return "GreenA";
    case MatrixRole::BasisB: return "BasisB";
    case MatrixRole::OrthoU: return "OrthoU";
    case MatrixRole::WeightsW: return "WeightsW";
    case MatrixRole::StencilL: return "StencilL";
  }
  return "unknown";
}

double greens_value(double s, double x) {
  require_domain(s, "s");
  require_domain(x, "x");
  return x < s ? (1.0 - s) * x : (1.0 - x) * s;
}

OperatorMatrix assemble_green_matrix(const Grid& grid, GreenBasis basis, double k) {
  if (grid.n_grid < 2) throw Error(ErrorKind::InvalidGrid, "grid is not initialized");
  const int m = grid.interior_size();
  const double h = grid.dx;
  auto node = [&](int i) { return static_cast<double>(i) / grid.n_grid; };
  Eigen::MatrixXd a(m, m);
  for (int i = 1; i <= m; ++i) {
    const double xi = node(i);
    for (int j = 1; j <= m; ++j) {
      const double xj = node(j);
      double value = 0.0;
      if (basis == GreenBasis::HatLinear) {
        auto left = [&](double s) { return greens_value(s, xi) * (s - node(j - 1)) / h; };
        auto right = [&](double s) { return greens_value(s, xi) * (node(j + 1) - s) / h; };
        value = simpson(left, node(j - 1), xj) + simpson(right, xj, node(j + 1));
      } else {
        auto g = [&](double s) { return greens_value(s, xi); };
        const double lo = xj - 0.5 * h;
        const double hi = xj + 0.5 * h;
        value = (i == j) ? simpson(g, lo, xi) + simpson(g, xi, hi) : simpson(g, lo, hi);
      }
      a(i - 1, j - 1) = value / k;
    }
  }
  // Symmetric in exact arithmetic; symmetrize away rounding.
  Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  return {std::move(sym), MatrixRole::GreenA};
}

Eigen::MatrixXd stiffness_matrix(const Grid& grid, double k) {
  const int m = grid.interior_size();
  Eigen::MatrixXd kmat = Eigen::MatrixXd::Zero(m, m);
  const double c = k / grid.dx;
  for (int i = 0; i < m; ++i) {
    kmat(i, i) = 2.0 * c;
    if (i > 0) kmat(i, i - 1) = -c;
    if (i + 1 < m) kmat(i, i + 1) = -c;
  }
  return kmat;
}

Eigen::MatrixXd mass_matrix(const Grid& grid) {
  const int m = grid.interior_size();
  Eigen::MatrixXd mm = Eigen::MatrixXd::Zero(m, m);
  const double c = grid.dx / 6.0;
  for (int i = 0; i < m; ++i) {
    mm(i, i) = 4.0 * c;
    if (i > 0) mm(i, i - 1) = c;
    if (i + 1 < m) mm(i, i + 1) = c;
  }
  return mm;
}

OperatorMatrix assemble_basis(Family family, int p, const Grid& grid) {
  const Eigen::Index m = grid.interior_size();
  const auto& x = grid.nodes;
  Eigen::MatrixXd b;
  switch (family) {
    case Family::Polynomial:
      if (p < 0) throw Error(ErrorKind::InvalidSpec, "polynomial basis needs p >= 0");
      b.resize(m, p + 1);
      for (int j = 0; j <= p; ++j)
        for (Eigen::Index i = 0; i < m; ++i) b(i, j) = std::pow(x[i], j);
      break;
    case Family::Sine:
    case Family::Cosine:
      if (p < 1) throw Error(ErrorKind::InvalidSpec, "trigonometric basis needs p >= 1");
      b.resize(m, p);
      for (int j = 1; j <= p; ++j)
        for (Eigen::Index i = 0; i < m; ++i)
          b(i, j - 1) = family == Family::Sine ? std::sin(j * kPi * x[i]) : std::cos(j * kPi * x[i]);
      break;
    case Family::FemPiecewiseLinear:
      b = Eigen::MatrixXd::Identity(m, m);
      break;
  }
  return {std::move(b), MatrixRole::BasisB};
}

OperatorMatrix orthonormal_range(const OperatorMatrix& basis, double rel_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis.data, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[0] > 0.0))
    throw Error(ErrorKind::RankZero, "basis matrix has rank zero");
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > rel_tol * sv[0]) ++rank;
  return {svd.matrixU().leftCols(rank), MatrixRole::OrthoU};
}

Eigen::MatrixXd range_projector(const OperatorMatrix& ortho) {
  return ortho.data * ortho.data.transpose();
}

OperatorMatrix predict_w_star(const OperatorMatrix& green, const OperatorMatrix& ortho,
                              const Eigen::MatrixXd& w0) {
  const Eigen::Index m = green.rows();
  if (green.cols() != m || ortho.rows() != m || w0.rows() != m || w0.cols() != m)
    throw Error(ErrorKind::ShapeMismatch, "predict_w_star: A, U and W0 are not conformable");
  const Eigen::MatrixXd proj = range_projector(ortho);
  Eigen::MatrixXd w = green.data * proj + w0 * (Eigen::MatrixXd::Identity(m, m) - proj);
  return {std::move(w), MatrixRole::WeightsW};
}

OperatorMatrix subspace_green_matrix(Family family, int p, const Grid& grid, double k) {
  if (family == Family::FemPiecewiseLinear) return assemble_green_matrix(grid, GreenBasis::HatLinear, k);
  const Eigen::MatrixXd b = assemble_basis(family, p, grid).data;
  const Eigen::MatrixXd s = basis_solutions(family, p, grid, k);
  return {s * pseudo_inverse(b, 1e-12), MatrixRole::GreenA};
}

OperatorMatrix consistent_green_matrix(Family family, int p, const Grid& grid, double k,
                                       GreenBasis basis) {
  const OperatorMatrix hat = assemble_green_matrix(grid, basis, k);
  if (family == Family::FemPiecewiseLinear) return hat;
  const OperatorMatrix u = orthonormal_range(assemble_basis(family, p, grid));
  const Eigen::Index m = hat.rows();
  const Eigen::MatrixXd proj = range_projector(u);
  Eigen::MatrixXd a = hat.data * (Eigen::MatrixXd::Identity(m, m) - proj) +
                      subspace_green_matrix(family, p, grid, k).data;
  return {std::move(a), MatrixRole::GreenA};
}

std::vector<double> fd_of_monomial(int n, int q, double dx) {
  const std::vector<double> w = stencil_half_weights(q);
  std::vector<double> out(static_cast<std::size_t>(std::max(n - 1, 1)), 0.0);
  // sum_s w_s (x + s dx)^n / dx^2 = sum_j C(n, j) x^{n-j} dx^{j-2} sum_s w_s s^j; odd j cancel.
  for (int j = 2; j <= n; j += 2) {
    double moment = 0.0;
    for (std::size_t s = 1; s < w.size(); ++s) moment += 2.0 * w[s] * std::pow(static_cast<double>(s), j);
    out[static_cast<std::size_t>(n - j)] += binomial(n, j) * std::pow(dx, j - 2) * moment;
  }
  return out;
}

FdErrorLaw predict_fd_w(std::span<const double> forcing_moments, int q, double dx, double k) {
  stencil_half_weights(q);
  if (!(dx > 0.0)) throw Error(ErrorKind::Domain, "dx must be positive");
  if (forcing_moments.empty()) throw Error(ErrorKind::Domain, "need at least one forcing moment");
  // Forcing monomial x^m has solution x^{m+2} / ((m+1)(m+2)) up to sign and k, so
  // with d_m = FD_q(that solution) the loss is sum_m E[c_m^2] ||w d_m - k x^m||^2.
  double a = 0.0;
  double b = 0.0;
  for (std::size_t m = 0; m < forcing_moments.size(); ++m) {
    const int deg = static_cast<int>(m);
    std::vector<double> d = fd_of_monomial(deg + 2, q, dx);
    const double scale = 1.0 / ((deg + 1.0) * (deg + 2.0));
    for (double& c : d) c *= scale;
    std::vector<double> target(m + 1, 0.0);
    target[m] = 1.0;
    a += forcing_moments[m] * integrate_product(d, d);
    b += forcing_moments[m] * integrate_product(d, target);
  }
  FdErrorLaw law;
  law.q = q;
  law.p = static_cast<int>(forcing_moments.size()) - 1;
  law.dx = dx;
  law.predicted_w = k * b / a;
  law.relative_error = b / a - 1.0;
  return law;
}

FdErrorLaw predict_fd_w(int p, int q, double dx, double k, FdSampling sampling) {
  if (p < 0) throw Error(ErrorKind::Domain, "p must be non-negative");
  std::vector<double> moments(static_cast<std::size_t>(p) + 1);
  for (int m = 0; m <= p; ++m) {
    // Uniform U[-1, 1] coefficients have E[c^2] = 1/3. Solution coefficient c_{m+2}
    // enters the forcing as (m+1)(m+2) c_{m+2}.
    const double lift = (m + 1.0) * (m + 2.0);
    moments[static_cast<std::size_t>(m)] =
        sampling == FdSampling::ForcingMonomials ? 1.0 / 3.0 : lift * lift / 3.0;
  }
  return predict_fd_w(moments, q, dx, k);
}

double fd_error_p2(double dx) {
  const double d2 = dx * dx;
  return d2 * (-245.0 * d2 - 315.0) / (245.0 * d2 * d2 + 630.0 * d2 + 669.0);
}

double error_bounds(const Eigen::MatrixXd& w0, const Eigen::MatrixXd& green, int p, int m) {
  if (p < 0 || p > m) throw Error(ErrorKind::Domain, "error_bounds needs 0 <= p <= M");
  const double a_norm = green.norm();
  if (!(a_norm > 0.0)) throw Error(ErrorKind::Domain, "Green's matrix has zero norm");
  return std::sqrt(static_cast<double>(m - p)) * (w0.norm() / a_norm + 1.0);
}

double tight_error(const Eigen::MatrixXd& green, const OperatorMatrix& ortho,
                   const Eigen::MatrixXd& w0) {
  const Eigen::Index m = green.rows();
  if (green.cols() != m || ortho.rows() != m || w0.rows() != m || w0.cols() != m)
    throw Error(ErrorKind::ShapeMismatch, "tight_error: A, U and W0 are not conformable");
  const Eigen::MatrixXd complement = Eigen::MatrixXd::Identity(m, m) - range_projector(ortho);
  return ((w0 - green) * complement).norm() / green.norm();
}

double relative_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& reference) {
  if (a.rows() != reference.rows() || a.cols() != reference.cols())
    throw Error(ErrorKind::ShapeMismatch, "relative_frobenius: shape mismatch");
  return (a - reference).norm() / reference.norm();
}

}  // namespace genbench
