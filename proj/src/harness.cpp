#include "genbench/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "genbench/error.hpp"
#include "genbench/keyvalue.hpp"
#include "genbench/parallel.hpp"
#include "genbench/rng.hpp"

namespace genbench {

namespace {

using Eigen::MatrixXd;

constexpr int kMaxStandardOrder = 8;

std::string family_prefix(Family f) {
  switch (f) {
    case Family::Polynomial: return "poly";
    case Family::Sine: return "sine";
    case Family::Cosine: return "cos";
    case Family::FemPiecewiseLinear: return "fem";
  }
  return "unknown";
}

}  // namespace

std::string FamilyDescriptor::name() const {
  if (family == Family::FemPiecewiseLinear) return "fem";
  return family_prefix(family) + std::to_string(p);
}

std::optional<FamilyDescriptor> parse_descriptor(const std::string& name) {
  if (name == "fem") return FamilyDescriptor{Family::FemPiecewiseLinear, 0};
  for (Family f : {Family::Polynomial, Family::Sine, Family::Cosine}) {
    const std::string prefix = family_prefix(f);
    if (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0) {
      const auto p = parse_int(name.substr(prefix.size()));
      if (p && *p >= 1 && *p <= 1000) return FamilyDescriptor{f, static_cast<int>(*p)};
    }
  }
  return std::nullopt;
}

std::vector<FamilyDescriptor> standard_families() {
  std::vector<FamilyDescriptor> out{{Family::FemPiecewiseLinear, 0}};
  for (Family f : {Family::Polynomial, Family::Cosine, Family::Sine})
    for (int p = 1; p <= kMaxStandardOrder; ++p) out.push_back({f, p});
  return out;
}

void FamilyGrid::validate() const {
  if (families.empty()) throw Error(ErrorKind::InvalidSpec, "family grid is empty");
  if (seeds.empty()) throw Error(ErrorKind::InvalidSpec, "at least one training seed is required");
  if (n_samples < 1) throw Error(ErrorKind::InvalidSpec, "sample count must be positive");
  std::set<std::string> seen;
  for (const auto& f : families)
    if (!seen.insert(f.name()).second)
      throw Error(ErrorKind::InvalidSpec, "family " + f.name() + " listed twice");
  make_grid(n_grid);
}

std::uint64_t dataset_seed(std::uint64_t data_seed, const FamilyDescriptor& family) {
  std::uint64_t s = data_seed ^ fnv1a64(family.name());
  return splitmix64(s);
}

std::vector<Dataset> build_datasets(const FamilyGrid& grid, unsigned jobs) {
  grid.validate();
  std::vector<Dataset> out(grid.families.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    const auto& d = grid.families[i];
    out[i] = generate_dataset(d.family, d.p, grid.n_grid, grid.n_samples,
                              dataset_seed(grid.data_seed, d));
  });
  return out;
}

double mse(const ModelParams& params, const Dataset& dataset) {
  if (params.m != dataset.grid.interior_size())
    throw Error(ErrorKind::Incompatible,
                "model has " + std::to_string(params.m) + " nodes but dataset grid has " +
                    std::to_string(dataset.grid.interior_size()));
  return model_mse(params, dataset.f, dataset.u, dataset.grid);
}

EvalGrid cross_eval(ModelKind kind, const FamilyGrid& grid, const TrainConfig& config, unsigned jobs) {
  return cross_eval(kind, grid, build_datasets(grid, jobs), config, jobs);
}

EvalGrid cross_eval(ModelKind kind, const FamilyGrid& grid, const std::vector<Dataset>& datasets,
                    const TrainConfig& config, unsigned jobs) {
  grid.validate();
  const std::size_t nf = grid.families.size();
  if (datasets.size() != nf)
    throw Error(ErrorKind::InvalidSpec, "one dataset per family is required");
  for (const auto& d : datasets)
    if (d.grid.n_grid != grid.n_grid)
      throw Error(ErrorKind::Incompatible, "all datasets must share n_grid = " + std::to_string(grid.n_grid));
  config.validate();

  const std::size_t ns = grid.seeds.size();
  std::vector<std::optional<ModelParams>> trained(nf * ns);
  std::vector<RunRecord> runs(nf * ns);
  parallel_for(nf * ns, jobs, [&](std::size_t idx) {
    const std::size_t row = idx / ns;
    TrainConfig c = config;
    c.seed = grid.seeds[idx % ns];
    RunRecord& r = runs[idx];
    r.row = row;
    r.seed = c.seed;
    try {
      TrainResult res = train(kind, datasets[row], c);
      r.train_mse = res.history.final_mse;
      trained[idx] = std::move(res.params);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Divergence) throw;
      r.diverged = true;
      r.train_mse = std::numeric_limits<double>::quiet_NaN();
      r.message = e.what();
    }
  });

  EvalGrid out;
  for (const auto& f : grid.families) out.names.push_back(f.name());
  out.mse = MatrixXd::Constant(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(nf),
                               std::numeric_limits<double>::quiet_NaN());
  out.meta.resize(nf * nf);
  out.runs = runs;

  std::vector<std::optional<std::size_t>> chosen(nf);
  for (std::size_t row = 0; row < nf; ++row) {
    for (std::size_t s = 0; s < ns; ++s) {
      const RunRecord& r = runs[row * ns + s];
      if (r.diverged) continue;
      if (!chosen[row] || r.train_mse < runs[*chosen[row]].train_mse) chosen[row] = row * ns + s;
    }
    if (!chosen[row]) out.failed_rows.push_back(row);
  }

  parallel_for(nf, jobs, [&](std::size_t row) {
    for (std::size_t col = 0; col < nf; ++col) {
      CellMeta& m = out.meta[row * nf + col];
      m.train_family = out.names[row];
      m.test_family = out.names[col];
      if (!chosen[row]) {
        m.train_mse = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const RunRecord& r = runs[*chosen[row]];
      m.chosen_seed = r.seed;
      m.train_mse = r.train_mse;
      out.mse(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
          mse(*trained[*chosen[row]], datasets[col]);
    }
  });
  return out;
}

bool subspace_contained(const FamilyDescriptor& test, const FamilyDescriptor& train) {
  if (test == train) return true;
  if (test.family == train.family && test.family != Family::FemPiecewiseLinear) return test.p <= train.p;
  return test.family == Family::Polynomial && test.p == 1 &&
         train.family == Family::FemPiecewiseLinear;
}

std::vector<ContainmentViolation> containment_violations(const EvalGrid& grid,
                                                         const std::vector<FamilyDescriptor>& families,
                                                         double wiggle) {
  std::vector<ContainmentViolation> out;
  const std::size_t n = families.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !subspace_contained(families[j], families[i])) continue;
      const double train = grid.cell(i, j).train_mse;
      const double test = grid.mse(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double ratio = test / train;
      if (!(test <= wiggle * train)) out.push_back({i, j, ratio});
    }
  }
  return out;
}

TheoryReport theory_comparison(const std::vector<int>& p_range, int n_grid, int q,
                               const TheoryOptions& o) {
  if (p_range.empty()) throw Error(ErrorKind::InvalidSpec, "p range is empty");
  const Grid grid = make_grid(n_grid);
  const MatrixXd a = assemble_green_matrix(grid, GreenBasis::HatLinear, o.k).data;
  TheoryReport report;
  report.n_grid = n_grid;
  report.q = q;
  report.rows.resize(p_range.size());
  parallel_for(p_range.size(), o.jobs, [&](std::size_t i) {
    const int p = p_range[i];
    TheoryRow& row = report.rows[i];
    row.p = p;
    const Dataset ds = generate_dataset(o.family, p, n_grid, o.n_samples,
                                        dataset_seed(o.data_seed, {o.family, p}), o.k);
    const OperatorMatrix u = orthonormal_range(assemble_basis(o.family, p, grid));
    const MatrixXd w0 = MatrixXd::Zero(a.rows(), a.cols());
    row.linear_predicted = tight_error(a, u, w0);
    const TrainResult lin = train(ModelKind::Linear, ds, theorem_mode_config(o.gd_steps));
    row.linear_empirical = relative_frobenius(lin.params.at("W"), a);

    const double w = fit_fd_parameter(ds, q);
    row.fd_empirical = std::abs(w - o.k) / o.k;
    if (o.family == Family::Polynomial) {
      row.fd_predicted_forcing =
          std::abs(predict_fd_w(p, q, grid.dx, o.k, FdSampling::ForcingMonomials).relative_error);
      row.fd_predicted_solution =
          std::abs(predict_fd_w(p, q, grid.dx, o.k, FdSampling::SolutionMonomials).relative_error);
    } else {
      row.fd_predicted_forcing = row.fd_predicted_solution = std::numeric_limits<double>::quiet_NaN();
    }
  });
  return report;
}

double bandedness(const MatrixXd& m) {
  double band = 0.0;
  double total = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j) * m(i, j);
      total += v;
      if (std::abs(i - j) <= 1) band += v;
    }
  }
  if (!(total > 0.0)) return 0.0;
  return std::clamp(band / total, 0.0, 1.0);
}

StencilInverse invert_weights(const MatrixXd& w, double max_condition) {
  if (w.rows() != w.cols() || w.rows() == 0)
    throw Error(ErrorKind::ShapeMismatch, "weight matrix must be square and non-empty");
  StencilInverse out;
  if (!w.allFinite()) {
    out.condition = std::numeric_limits<double>::infinity();
    return out;
  }
  Eigen::JacobiSVD<MatrixXd> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  out.condition = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
  if (!(out.condition < max_condition)) return out;
  out.invertible = true;
  out.l_hat = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  out.bandedness = bandedness(out.l_hat);
  return out;
}

ProbeResult probe_greens(const ModelParams& params, const Grid& grid, const MatrixXd& reference,
                         bool invert) {
  if (params.kind == ModelKind::FdFit)
    throw Error(ErrorKind::Incompatible, "the stencil fit maps u to f and has no forcing response");
  const Eigen::Index m = params.m;
  if (grid.interior_size() != m || reference.rows() != m || reference.cols() != m)
    throw Error(ErrorKind::Incompatible, "probe grid or reference does not match the model");
  ProbeResult r;
  r.reference = reference;
  if (params.kind == ModelKind::Linear) {
    // forward(e_j) is column j of W.
    r.g_raw = params.at("W");
    r.g_hat = r.g_raw;
  } else {
    const RowMatrix eye = RowMatrix::Identity(m, m);
    r.g_raw = forward(params, eye, grid).transpose();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
    const Eigen::VectorXd zero_response = forward(params, zero, grid);
    r.g_hat = r.g_raw.colwise() - zero_response;
  }
  r.relative_error = relative_frobenius(r.g_hat, reference);
  if (invert) r.inverse = invert_weights(r.g_hat);
  return r;
}

std::vector<SweepRow> fd_grid_sweep(const std::vector<int>& q_list, const std::vector<int>& n_grid_list,
                                    const std::vector<int>& p_list, const SweepOptions& o) {
  if (q_list.empty() || n_grid_list.empty() || p_list.empty())
    throw Error(ErrorKind::InvalidSpec, "sweep lists must be non-empty");
  std::vector<SweepRow> rows;
  for (int q : q_list)
    for (int n : n_grid_list)
      for (int p : p_list) rows.push_back({q, n, p, 0.0, 0.0, 0.0});
  parallel_for(rows.size(), o.jobs, [&](std::size_t i) {
    SweepRow& r = rows[i];
    std::uint64_t s = dataset_seed(o.data_seed, {o.family, r.p}) + static_cast<std::uint64_t>(r.n_grid);
    const Dataset ds = generate_dataset(o.family, r.p, r.n_grid, o.n_samples, splitmix64(s), o.k);
    ModelShape shape;
    shape.stencil_q = r.q;
    ModelParams params = init_model(ModelKind::FdFit, static_cast<int>(ds.grid.interior_size()), 0,
                                    InitScheme::Zeros, shape);
    r.w = fit_fd_parameter(ds, r.q);
    params.at("w")(0, 0) = r.w;
    r.train_mse = mse(params, ds);
    r.relative_error = std::abs(r.w - o.k) / o.k;
  });
  return rows;
}

double fit_convergence_order(const std::vector<double>& dx, const std::vector<double>& err) {
  if (dx.size() != err.size() || dx.size() < 3)
    throw Error(ErrorKind::Domain, "convergence fit needs at least three (dx, error) pairs");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(dx[i] > 0.0) || !(err[i] > 0.0))
      throw Error(ErrorKind::Domain, "convergence fit needs positive dx and error values");
    const double x = std::log(dx[i]);
    const double y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(dx.size());
  const double denom = n * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0)) throw Error(ErrorKind::Domain, "all dx values are equal");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace genbench
