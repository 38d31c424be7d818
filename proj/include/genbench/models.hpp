#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "genbench/binary_io.hpp"
#include "genbench/datasets.hpp"
#include "genbench/grid.hpp"

namespace genbench {

enum class ModelKind { FdFit, Linear, DeepLinear, Mlp, DeepONet };

std::string model_kind_name(ModelKind kind);
/// Accepts "fd", "linear", "deeplinear"/"deep-linear", "mlp", "deeponet".
std::optional<ModelKind> parse_model_kind(const std::string& name);

enum class InitScheme { Zeros, FanInUniform };

std::string init_scheme_name(InitScheme scheme);
std::optional<InitScheme> parse_init_scheme(const std::string& name);

inline constexpr double kLeakySlope = 0.01;
inline constexpr int kDeepLinearHidden = 100;
inline constexpr int kMlpHidden = 1024;
inline constexpr int kDeepONetWidth = 256;

/// Architecture sizes. Zero means the kind's default width.
struct ModelShape {
  int hidden = 0;
  int stencil_q = 2;
  bool output_bias = false;
};

using TensorMap = std::map<std::string, Eigen::MatrixXd>;

/// Named parameter tensors for one architecture, plus AdamW moments.
///
///   FdFit      w (1x1)
///   Linear     W (MxM)
///   DeepLinear W1 (HxM), b1 (Hx1), W2 (MxH), b2 (Mx1)           H = 100
///   Mlp        same names, H = 1024, leaky ReLU between layers
///   DeepONet   branch_W1, branch_b1, branch_W2, branch_b2 : f -> [M, 256, 256]
///              trunk_W1, trunk_b1, trunk_W2, trunk_b2     : x -> [1, 256, 256]
///              optional output_b; u(x_j) = branch(f) . trunk(x_j), ReLU
struct ModelParams {
  ModelKind kind = ModelKind::Linear;
  int m = 0;
  ModelShape shape;
  std::uint64_t seed = 0;
  TensorMap tensors;

  TensorMap adam_m;
  TensorMap adam_v;
  long long adam_step = 0;

  Eigen::MatrixXd& at(const std::string& name);
  const Eigen::MatrixXd& at(const std::string& name) const;
  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Second-derivative stencil results at nodes with full support.
/// Indices are 0-based interior indices [first, last].
struct StencilResult {
  Eigen::VectorXd values;
  int first = 0;
  int last = -1;
};

/// FD2 (1, -2, 1)/dx^2 or FD4 (-1, 16, -30, 16, -1)/(12 dx^2). The boundary
/// values u(0) = u(1) = 0 act as virtual nodes: FD2 covers every interior
/// node, FD4 skips the first and last.
StencilResult fd_stencil_apply(const Eigen::VectorXd& u, double dx, int q);

/// Row-wise version over a sample matrix; returns N x (last - first + 1).
RowMatrix fd_stencil_apply_rows(const RowMatrix& u, double dx, int q, int* first = nullptr);

/// Closed-form least squares for w in  w * FD_q(u) = -f.
double fit_fd_parameter(const Dataset& dataset, int q);

ModelParams init_model(ModelKind kind, int m, std::uint64_t seed, InitScheme scheme,
                       ModelShape shape = {});

/// Row-wise batch prediction. For operator models the input is f and the
/// output is u_hat. For FdFit the input is u and the output is
/// f_hat = -w FD_q(u) at the supported nodes.
RowMatrix forward(const ModelParams& params, const RowMatrix& inputs, const Grid& grid);
Eigen::VectorXd forward(const ModelParams& params, const Eigen::VectorXd& input, const Grid& grid);

/// MeanSquared: mean over samples and nodes of r^2 (what reports use).
/// HalfSumPerSample: (1/2N) sum_n ||r_n||^2, the convention the GD analysis uses.
enum class LossConvention { MeanSquared, HalfSumPerSample };

struct LossAndGrads {
  double mse = 0.0;
  double loss = 0.0;
  TensorMap grads;
};

/// Exact gradients by backpropagation. `f` and `u` hold one sample per row.
LossAndGrads loss_and_grads(const ModelParams& params, const RowMatrix& f, const RowMatrix& u,
                            const Grid& grid,
                            LossConvention convention = LossConvention::MeanSquared);

/// Mean squared prediction error of `params` on (f, u).
double model_mse(const ModelParams& params, const RowMatrix& f, const RowMatrix& u,
                 const Grid& grid);

}  // namespace genbench
