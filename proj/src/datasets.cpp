#include "genbench/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "genbench/error.hpp"
#include "genbench/keyvalue.hpp"
#include "genbench/parallel.hpp"

namespace genbench {

namespace {

constexpr double kPi = std::numbers::pi;

void require_positive_k(double k, ErrorKind kind) {
  if (!(k > 0.0) || !std::isfinite(k))
    throw Error(kind, "material constant k must be positive and finite, got " + format_double(k));
}

void validate_order(Family family, int p) {
  if (family != Family::FemPiecewiseLinear && p < 1)
    throw Error(ErrorKind::InvalidSpec,
                family_name(family) + " family requires p >= 1, got " + std::to_string(p));
}

}  // namespace

std::string family_name(Family family) {
  switch (family) {
    case Family::Polynomial: return "polynomial";
    case Family::Sine: return "sine";
    case Family::Cosine: return "cosine";
    case Family::FemPiecewiseLinear: return "fem";
  }
  return "unknown";
}

std::optional<Family> parse_family(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "polynomial" || s == "poly") return Family::Polynomial;
  if (s == "sine" || s == "sin") return Family::Sine;
  if (s == "cosine" || s == "cos") return Family::Cosine;
  if (s == "fem" || s == "fempiecewiselinear" || s == "piecewise-linear") return Family::FemPiecewiseLinear;
  return std::nullopt;
}

Sample Dataset::sample(std::size_t n) const {
  return Sample{f.row(static_cast<Eigen::Index>(n)).transpose(),
                u.row(static_cast<Eigen::Index>(n)).transpose()};
}

std::vector<double> polynomial_from_roots(std::span<const double> roots) {
  std::vector<double> c{1.0};
  for (double r : roots) {
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i + 1] += c[i];
      next[i] -= r * c[i];
    }
    c = std::move(next);
  }
  return c;
}

double evaluate_polynomial(std::span<const double> coefficients, double x) {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

ForcingSpec sample_forcing(Family family, int p, const Grid& grid, Rng& rng, double k) {
  validate_order(family, p);
  ForcingSpec spec;
  spec.family = family;
  spec.order_p = family == Family::FemPiecewiseLinear ? 0 : p;
  spec.k = k;
  switch (family) {
    case Family::Polynomial: {
      std::vector<double> roots(static_cast<std::size_t>(p));
      for (double& r : roots) r = rng.uniform(-1.0, 2.0);
      spec.coefficients = polynomial_from_roots(roots);
      break;
    }
    case Family::Sine:
    case Family::Cosine:
      spec.coefficients.resize(static_cast<std::size_t>(p));
      for (double& c : spec.coefficients) c = rng.uniform(-1.0, 1.0);
      break;
    case Family::FemPiecewiseLinear:
      spec.coefficients.assign(static_cast<std::size_t>(grid.n_grid) + 1, 0.0);
      for (int i = 1; i < grid.n_grid; ++i) spec.coefficients[static_cast<std::size_t>(i)] = rng.normal();
      break;
  }
  return spec;
}

ForcingSpec sample_forcing(Family family, int p, const Grid& grid, std::uint64_t seed, double k) {
  Rng rng(seed);
  return sample_forcing(family, p, grid, rng, k);
}

Sample solve_closed_form(const ForcingSpec& spec, const Grid& grid) {
  if (spec.family == Family::FemPiecewiseLinear)
    throw Error(ErrorKind::WrongSolver, "FEM forcing must be solved with solve_fem");
  require_positive_k(spec.k, ErrorKind::InvalidSpec);
  const Eigen::Index m = grid.interior_size();
  Sample s{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  const auto& c = spec.coefficients;

  if (spec.family == Family::Polynomial) {
    if (c.empty()) throw Error(ErrorKind::InvalidSpec, "polynomial forcing has no coefficients");
    // -k u'' = sum a_j x^j with u(0) = u(1) = 0 gives
    // u = (1/k) sum a_j (x - x^{j+2}) / ((j+1)(j+2)).
    std::vector<double> uc(c.size() + 2, 0.0);
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double w = c[j] / (static_cast<double>(j + 1) * static_cast<double>(j + 2) * spec.k);
      uc[1] += w;
      uc[j + 2] -= w;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const double x = grid.nodes[i];
      s.f[i] = evaluate_polynomial(c, x);
      s.u[i] = evaluate_polynomial(uc, x);
    }
    return s;
  }

  const bool sine = spec.family == Family::Sine;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = grid.nodes[i];
    double f = 0.0;
    double u = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double n = static_cast<double>(j + 1);
      const double scale = 1.0 / (spec.k * n * n * kPi * kPi);
      if (sine) {
        const double v = std::sin(n * kPi * x);
        f += c[j] * v;
        u += c[j] * v * scale;
      } else {
        const double v = std::cos(n * kPi * x);
        // Particular solution plus the linear term that restores u(0) = u(1) = 0.
        const double end = (j % 2 == 0) ? -1.0 : 1.0;
        f += c[j] * v;
        u += c[j] * (v - (1.0 - x) - end * x) * scale;
      }
    }
    s.f[i] = f;
    s.u[i] = u;
  }
  return s;
}

Eigen::VectorXd solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                  std::span<const double> super, std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (n == 0 || sub.size() != n || super.size() != n || rhs.size() != n)
    throw Error(ErrorKind::ShapeMismatch, "tridiagonal system has inconsistent sizes");
  std::vector<double> c_star(n);
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  double pivot = diag[0];
  if (pivot == 0.0 || !std::isfinite(pivot)) throw Error(ErrorKind::Solver, "zero pivot in row 0");
  c_star[0] = super[0] / pivot;
  x[0] = rhs[0] / pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = diag[i] - sub[i] * c_star[i - 1];
    if (pivot == 0.0 || !std::isfinite(pivot))
      throw Error(ErrorKind::Solver, "zero pivot in row " + std::to_string(i));
    c_star[i] = super[i] / pivot;
    x[static_cast<Eigen::Index>(i)] = (rhs[i] - sub[i] * x[static_cast<Eigen::Index>(i - 1)]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;)
    x[static_cast<Eigen::Index>(i)] -= c_star[i] * x[static_cast<Eigen::Index>(i + 1)];
  return x;
}

Sample solve_fem(const ForcingSpec& spec, const Grid& grid) {
  if (spec.family != Family::FemPiecewiseLinear)
    throw Error(ErrorKind::WrongSolver, family_name(spec.family) + " forcing must use solve_closed_form");
  const std::size_t nodes = static_cast<std::size_t>(grid.n_grid) + 1;
  if (spec.coefficients.size() != nodes)
    throw Error(ErrorKind::InvalidSpec, "FEM forcing needs " + std::to_string(nodes) +
                                            " nodal values, got " +
                                            std::to_string(spec.coefficients.size()));
  require_positive_k(spec.k, ErrorKind::Solver);

  const std::size_t m = nodes - 2;
  const double h = grid.dx;
  const double stiff = spec.k / h;
  std::vector<double> sub(m, -stiff), diag(m, 2.0 * stiff), super(m, -stiff), load(m);
  const auto& f = spec.coefficients;
  for (std::size_t i = 0; i < m; ++i)
    load[i] = h / 6.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);

  Sample s;
  s.u = solve_tridiagonal(sub, diag, super, load);
  s.f = Eigen::Map<const Eigen::VectorXd>(f.data() + 1, static_cast<Eigen::Index>(m));
  return s;
}

Dataset generate_dataset(Family family, int p, int n_grid, std::size_t n_examples,
                         std::uint64_t seed, double k, unsigned jobs) {
  if (n_examples < 1) throw Error(ErrorKind::InvalidSpec, "n_examples must be at least 1");
  validate_order(family, p);
  Dataset ds;
  ds.grid = make_grid(n_grid);
  ds.family = family;
  ds.order_p = family == Family::FemPiecewiseLinear ? 0 : p;
  ds.seed = seed;
  ds.k = k;
  const Eigen::Index m = ds.grid.interior_size();
  ds.f.resize(static_cast<Eigen::Index>(n_examples), m);
  ds.u.resize(static_cast<Eigen::Index>(n_examples), m);

  parallel_for(n_examples, jobs, [&](std::size_t n) {
    Rng rng = Rng::substream(seed, n);
    const ForcingSpec spec = sample_forcing(family, p, ds.grid, rng, k);
    const Sample s = family == Family::FemPiecewiseLinear ? solve_fem(spec, ds.grid)
                                                          : solve_closed_form(spec, ds.grid);
    ds.f.row(static_cast<Eigen::Index>(n)) = s.f.transpose();
    ds.u.row(static_cast<Eigen::Index>(n)) = s.u.transpose();
  });
  return normalize(std::move(ds));
}

Dataset normalize(Dataset dataset) {
  if (dataset.size() == 0)
    throw Error(ErrorKind::DegenerateNormalization, "cannot normalize an empty dataset");
  const double mean_norm = dataset.u.rowwise().norm().mean();
  if (!(mean_norm > 0.0) || !std::isfinite(mean_norm))
    throw Error(ErrorKind::DegenerateNormalization,
                "mean solution norm is " + format_double(mean_norm));
  const double s = 1.0 / mean_norm;
  dataset.f *= s;
  dataset.u *= s;
  dataset.norm_scale *= s;
  return dataset;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  KeyValue kv;
  kv.set("schema_version", kDatasetSchemaVersion);
  kv.set("family", family_name(dataset.family));
  kv.set("p", dataset.order_p);
  kv.set("n_grid", dataset.grid.n_grid);
  kv.set("M", static_cast<std::int64_t>(dataset.u.cols()));
  kv.set("N", static_cast<std::int64_t>(dataset.size()));
  kv.set("seed", dataset.seed);
  kv.set("k", dataset.k);
  kv.set("norm_scale", dataset.norm_scale);
  kv.set("rng", std::string(kRngName));
  kv.set("nodes", "interior-only");
  kv.set("layout", "row-major f64le N x M");
  write_f64(dir / "f.bin", std::span<const double>(dataset.f.data(), static_cast<std::size_t>(dataset.f.size())));
  write_f64(dir / "u.bin", std::span<const double>(dataset.u.data(), static_cast<std::size_t>(dataset.u.size())));
  kv.write(dir / "manifest");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorKind::Io, "dataset directory " + dir.string() + " does not exist");
  const KeyValue kv = KeyValue::read(dir / "manifest");
  const auto version = kv.get_int("schema_version");
  if (version != kDatasetSchemaVersion)
    throw Error(ErrorKind::Io, "dataset schema version " + std::to_string(version) +
                                   " is not supported (expected " +
                                   std::to_string(kDatasetSchemaVersion) + ")");
  const auto family = parse_family(kv.get("family"));
  if (!family) throw Error(ErrorKind::Io, "unknown family '" + kv.get("family") + "' in manifest");
  const auto n_grid = kv.get_int("n_grid");
  const auto m = kv.get_int("M");
  const auto n = kv.get_int("N");
  if (n_grid < 2 || m != n_grid - 1)
    throw Error(ErrorKind::Io, "manifest inconsistency: M = " + std::to_string(m) +
                                   " but n_grid = " + std::to_string(n_grid));
  if (n < 1) throw Error(ErrorKind::Io, "manifest declares N = " + std::to_string(n));

  Dataset ds;
  ds.grid = make_grid(static_cast<int>(n_grid));
  ds.family = *family;
  ds.order_p = static_cast<int>(kv.get_int("p"));
  ds.seed = kv.get_uint("seed");
  ds.k = kv.get_double("k");
  ds.norm_scale = kv.get_double("norm_scale");
  const auto count = static_cast<std::size_t>(n * m);
  auto f = read_f64(dir / "f.bin", count);
  auto u = read_f64(dir / "u.bin", count);
  ds.f = Eigen::Map<RowMatrix>(f.data(), n, m);
  ds.u = Eigen::Map<RowMatrix>(u.data(), n, m);
  if (!ds.f.allFinite() || !ds.u.allFinite())
    throw Error(ErrorKind::Io, "dataset " + dir.string() + " contains non-finite values");
  return ds;
}

}  // namespace genbench
