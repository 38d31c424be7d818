#include "genbench/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "genbench/error.hpp"
#include "genbench/rng.hpp"

namespace genbench {

namespace {

using Eigen::MatrixXd;

int default_hidden(ModelKind kind) {
  switch (kind) {
    case ModelKind::DeepLinear: return kDeepLinearHidden;
    case ModelKind::Mlp: return kMlpHidden;
    case ModelKind::DeepONet: return kDeepONetWidth;
    default: return 0;
  }
}

MatrixXd add_bias(MatrixXd z, const MatrixXd& b) {
  z.colwise() += b.col(0);
  return z;
}

MatrixXd relu(const MatrixXd& z) { return z.cwiseMax(0.0); }

MatrixXd relu_grad(const MatrixXd& z) { return (z.array() > 0.0).cast<double>().matrix(); }

MatrixXd leaky(const MatrixXd& z) {
  return (z.array() > 0.0).select(z.array(), kLeakySlope * z.array()).matrix();
}

MatrixXd leaky_grad(const MatrixXd& z) {
  return (z.array() > 0.0).select(Eigen::ArrayXXd::Ones(z.rows(), z.cols()), kLeakySlope).matrix();
}

// Intermediate values kept for backpropagation. x is M x N (one sample per column).
struct Tape {
  MatrixXd x;
  MatrixXd z1, h1;
  MatrixXd branch, tz1, th1, tz2, tout;
  MatrixXd out;
};

void check_input(const ModelParams& p, const RowMatrix& inputs) {
  if (inputs.cols() != p.m)
    throw Error(ErrorKind::Incompatible, "model expects " + std::to_string(p.m) +
                                             " nodes per sample, got " + std::to_string(inputs.cols()));
}

// Operator models only; FdFit is handled separately.
void run_forward(const ModelParams& p, const Grid& grid, Tape& t) {
  switch (p.kind) {
    case ModelKind::Linear:
      t.out = p.at("W") * t.x;
      return;
    case ModelKind::DeepLinear:
      t.h1 = add_bias(p.at("W1") * t.x, p.at("b1"));
      t.out = add_bias(p.at("W2") * t.h1, p.at("b2"));
      return;
    case ModelKind::Mlp:
      t.z1 = add_bias(p.at("W1") * t.x, p.at("b1"));
      t.h1 = leaky(t.z1);
      t.out = add_bias(p.at("W2") * t.h1, p.at("b2"));
      return;
    case ModelKind::DeepONet: {
      if (grid.interior_size() != p.m)
        throw Error(ErrorKind::Incompatible, "DeepONet grid does not match model size");
      t.z1 = add_bias(p.at("branch_W1") * t.x, p.at("branch_b1"));
      t.h1 = relu(t.z1);
      const MatrixXd branch = add_bias(p.at("branch_W2") * t.h1, p.at("branch_b2"));
      const MatrixXd xs = grid.nodes.transpose();
      t.tz1 = add_bias(p.at("trunk_W1") * xs, p.at("trunk_b1"));
      t.th1 = relu(t.tz1);
      t.tz2 = add_bias(p.at("trunk_W2") * t.th1, p.at("trunk_b2"));
      t.tout = relu(t.tz2);
      t.out = t.tout.transpose() * branch;
      if (p.shape.output_bias) t.out.array() += p.at("output_b")(0, 0);
      t.branch = branch;
      return;
    }
    case ModelKind::FdFit:
      break;
  }
  throw Error(ErrorKind::InvalidSpec, "run_forward called for FdFit");
}

std::vector<double> stencil(int q) {
  if (q == 2) return {1.0, -2.0, 1.0};
  if (q == 4) return {-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0};
  throw Error(ErrorKind::UnsupportedStencil,
              "stencil order q = " + std::to_string(q) + " is not supported (use 2 or 4)");
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::FdFit: return "fd";
    case ModelKind::Linear: return "linear";
    case ModelKind::DeepLinear: return "deeplinear";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::DeepONet: return "deeponet";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "fd" || s == "fdfit" || s == "finite-difference") return ModelKind::FdFit;
  if (s == "linear") return ModelKind::Linear;
  if (s == "deeplinear" || s == "deep-linear" || s == "deep_linear") return ModelKind::DeepLinear;
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "deeponet") return ModelKind::DeepONet;
  return std::nullopt;
}

std::string init_scheme_name(InitScheme scheme) {
  return scheme == InitScheme::Zeros ? "zeros" : "fan-in";
}

std::optional<InitScheme> parse_init_scheme(const std::string& name) {
  if (name == "zeros" || name == "zero") return InitScheme::Zeros;
  if (name == "fan-in" || name == "fanin" || name == "uniform") return InitScheme::FanInUniform;
  return std::nullopt;
}

MatrixXd& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(ErrorKind::ShapeMismatch, "model has no tensor '" + name + "'");
  return it->second;
}

const MatrixXd& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(ErrorKind::ShapeMismatch, "model has no tensor '" + name + "'");
  return it->second;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

bool ModelParams::all_finite() const {
  return std::all_of(tensors.begin(), tensors.end(),
                     [](const auto& kv) { return kv.second.allFinite(); });
}

StencilResult fd_stencil_apply(const Eigen::VectorXd& u, double dx, int q) {
  RowMatrix row = u.transpose();
  StencilResult r;
  const RowMatrix d = fd_stencil_apply_rows(row, dx, q, &r.first);
  r.values = d.row(0).transpose();
  r.last = r.first + static_cast<int>(d.cols()) - 1;
  return r;
}

RowMatrix fd_stencil_apply_rows(const RowMatrix& u, double dx, int q, int* first) {
  const std::vector<double> w = stencil(q);
  const int half = static_cast<int>(w.size()) / 2;
  const int m = static_cast<int>(u.cols());
  // Interior node i (0-based) is node i+1 of the full grid; the stencil reaches
  // full-grid nodes i+1-half .. i+1+half, which must lie within 0..m+1.
  const int lo = half - 1;
  const int hi = m - half;
  if (m < 1 || hi < lo)
    throw Error(ErrorKind::ShapeMismatch, "vector of length " + std::to_string(m) +
                                              " is too short for a " + std::to_string(w.size()) +
                                              "-point stencil");
  if (!(dx > 0.0)) throw Error(ErrorKind::Domain, "dx must be positive");
  RowMatrix padded = RowMatrix::Zero(u.rows(), m + 2);
  padded.middleCols(1, m) = u;
  RowMatrix out = RowMatrix::Zero(u.rows(), hi - lo + 1);
  const double inv = 1.0 / (dx * dx);
  for (int i = lo; i <= hi; ++i) {
    auto col = out.col(i - lo);
    for (int s = -half; s <= half; ++s) col += w[static_cast<std::size_t>(s + half)] * padded.col(i + 1 + s);
    col *= inv;
  }
  if (first) *first = lo;
  return out;
}

double fit_fd_parameter(const Dataset& dataset, int q) {
  if (dataset.size() == 0) throw Error(ErrorKind::DegenerateFit, "cannot fit on an empty dataset");
  int first = 0;
  const RowMatrix d = fd_stencil_apply_rows(dataset.u, dataset.grid.dx, q, &first);
  const auto f = dataset.f.middleCols(first, d.cols());
  const double dd = d.cwiseProduct(d).sum();
  if (!(dd > 0.0)) throw Error(ErrorKind::DegenerateFit, "stencil output is identically zero");
  return -d.cwiseProduct(f).sum() / dd;
}

ModelParams init_model(ModelKind kind, int m, std::uint64_t seed, InitScheme scheme,
                       ModelShape shape) {
  if (m < 1) throw Error(ErrorKind::InvalidGrid, "model size must be positive");
  ModelParams p;
  p.kind = kind;
  p.m = m;
  p.seed = seed;
  p.shape = shape;
  if (p.shape.hidden <= 0) p.shape.hidden = default_hidden(kind);
  const int h = p.shape.hidden;
  Rng rng(seed);

  auto weight = [&](int rows, int cols) {
    MatrixXd w = MatrixXd::Zero(rows, cols);
    if (scheme == InitScheme::FanInUniform) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
      for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) w(i, j) = rng.uniform(-bound, bound);
    }
    return w;
  };
  auto bias = [](int rows) { return MatrixXd::Zero(rows, 1); };

  switch (kind) {
    case ModelKind::FdFit:
      stencil(p.shape.stencil_q);
      p.tensors["w"] = MatrixXd::Constant(1, 1, scheme == InitScheme::Zeros ? 0.0 : 1.0);
      break;
    case ModelKind::Linear:
      p.tensors["W"] = weight(m, m);
      break;
    case ModelKind::DeepLinear:
    case ModelKind::Mlp:
      p.tensors["W1"] = weight(h, m);
      p.tensors["b1"] = bias(h);
      p.tensors["W2"] = weight(m, h);
      p.tensors["b2"] = bias(m);
      break;
    case ModelKind::DeepONet:
      p.tensors["branch_W1"] = weight(h, m);
      p.tensors["branch_b1"] = bias(h);
      p.tensors["branch_W2"] = weight(h, h);
      p.tensors["branch_b2"] = bias(h);
      p.tensors["trunk_W1"] = weight(h, 1);
      p.tensors["trunk_b1"] = bias(h);
      p.tensors["trunk_W2"] = weight(h, h);
      p.tensors["trunk_b2"] = bias(h);
      if (p.shape.output_bias) p.tensors["output_b"] = MatrixXd::Zero(1, 1);
      break;
  }
  return p;
}

RowMatrix forward(const ModelParams& params, const RowMatrix& inputs, const Grid& grid) {
  check_input(params, inputs);
  if (params.kind == ModelKind::FdFit) {
    const RowMatrix d = fd_stencil_apply_rows(inputs, grid.dx, params.shape.stencil_q);
    return -params.at("w")(0, 0) * d;
  }
  Tape t;
  t.x = inputs.transpose();
  run_forward(params, grid, t);
  return t.out.transpose();
}

Eigen::VectorXd forward(const ModelParams& params, const Eigen::VectorXd& input, const Grid& grid) {
  RowMatrix row = input.transpose();
  return forward(params, row, grid).row(0).transpose();
}

LossAndGrads loss_and_grads(const ModelParams& params, const RowMatrix& f, const RowMatrix& u,
                            const Grid& grid, LossConvention convention) {
  if (f.rows() == 0 || f.rows() != u.rows() || f.cols() != u.cols())
    throw Error(ErrorKind::ShapeMismatch, "loss_and_grads: empty or mismatched batch");
  check_input(params, f);
  const double n = static_cast<double>(f.rows());
  LossAndGrads out;

  if (params.kind == ModelKind::FdFit) {
    int first = 0;
    const RowMatrix d = fd_stencil_apply_rows(u, grid.dx, params.shape.stencil_q, &first);
    const double w = params.at("w")(0, 0);
    const RowMatrix r = -w * d - f.middleCols(first, d.cols());
    const double sq = r.squaredNorm();
    const double count = n * static_cast<double>(d.cols());
    out.mse = sq / count;
    const double coef = convention == LossConvention::MeanSquared ? 2.0 / count : 1.0 / n;
    out.loss = convention == LossConvention::MeanSquared ? out.mse : 0.5 * sq / n;
    out.grads["w"] = MatrixXd::Constant(1, 1, -coef * r.cwiseProduct(d).sum());
    return out;
  }

  Tape t;
  t.x = f.transpose();
  run_forward(params, grid, t);
  const MatrixXd r = t.out - u.transpose();
  const double sq = r.squaredNorm();
  const double count = n * static_cast<double>(params.m);
  out.mse = sq / count;
  out.loss = convention == LossConvention::MeanSquared ? out.mse : 0.5 * sq / n;
  const MatrixXd d_out = (convention == LossConvention::MeanSquared ? 2.0 / count : 1.0 / n) * r;

  auto& g = out.grads;
  switch (params.kind) {
    case ModelKind::Linear:
      g["W"] = d_out * t.x.transpose();
      break;
    case ModelKind::DeepLinear:
    case ModelKind::Mlp: {
      g["W2"] = d_out * t.h1.transpose();
      g["b2"] = d_out.rowwise().sum();
      MatrixXd d_h = params.at("W2").transpose() * d_out;
      if (params.kind == ModelKind::Mlp) d_h.array() *= leaky_grad(t.z1).array();
      g["W1"] = d_h * t.x.transpose();
      g["b1"] = d_h.rowwise().sum();
      break;
    }
    case ModelKind::DeepONet: {
      // out = tout^T * branch
      const MatrixXd d_branch = t.tout * d_out;
      MatrixXd d_trunk = t.branch * d_out.transpose();
      g["branch_W2"] = d_branch * t.h1.transpose();
      g["branch_b2"] = d_branch.rowwise().sum();
      MatrixXd d_bh = params.at("branch_W2").transpose() * d_branch;
      d_bh.array() *= relu_grad(t.z1).array();
      g["branch_W1"] = d_bh * t.x.transpose();
      g["branch_b1"] = d_bh.rowwise().sum();

      d_trunk.array() *= relu_grad(t.tz2).array();
      g["trunk_W2"] = d_trunk * t.th1.transpose();
      g["trunk_b2"] = d_trunk.rowwise().sum();
      MatrixXd d_th = params.at("trunk_W2").transpose() * d_trunk;
      d_th.array() *= relu_grad(t.tz1).array();
      g["trunk_W1"] = d_th * grid.nodes;
      g["trunk_b1"] = d_th.rowwise().sum();
      if (params.shape.output_bias) g["output_b"] = MatrixXd::Constant(1, 1, d_out.sum());
      break;
    }
    case ModelKind::FdFit:
      break;
  }
  return out;
}

double model_mse(const ModelParams& params, const RowMatrix& f, const RowMatrix& u,
                 const Grid& grid) {
  if (params.kind == ModelKind::FdFit) {
    check_input(params, u);
    int first = 0;
    const RowMatrix d = fd_stencil_apply_rows(u, grid.dx, params.shape.stencil_q, &first);
    const RowMatrix r = -params.at("w")(0, 0) * d - f.middleCols(first, d.cols());
    return r.squaredNorm() / static_cast<double>(r.size());
  }
  const RowMatrix pred = forward(params, f, grid);
  if (pred.rows() != u.rows() || pred.cols() != u.cols())
    throw Error(ErrorKind::Incompatible, "prediction and target shapes differ");
  return (pred - u).squaredNorm() / static_cast<double>(u.size());
}

}  // namespace genbench
