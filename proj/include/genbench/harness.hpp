#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "genbench/datasets.hpp"
#include "genbench/models.hpp"
#include "genbench/oracle.hpp"
#include "genbench/training.hpp"

namespace genbench {

struct FamilyDescriptor {
  Family family = Family::Polynomial;
  int p = 1;

  /// "fem", "poly3", "cos2", "sine8".
  std::string name() const;
  bool operator==(const FamilyDescriptor&) const = default;
};

std::optional<FamilyDescriptor> parse_descriptor(const std::string& name);

/// FEM, Poly 1..8, Cos 1..8, Sine 1..8.
std::vector<FamilyDescriptor> standard_families();

struct FamilyGrid {
  std::vector<FamilyDescriptor> families = standard_families();
  int n_grid = 22;
  std::size_t n_samples = 1000;
  std::uint64_t data_seed = 0;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  /// Throws Error(InvalidSpec) for an empty list, duplicate families or no seeds.
  void validate() const;
};

/// Seed of the dataset generated for `family` under a grid's data seed.
std::uint64_t dataset_seed(std::uint64_t data_seed, const FamilyDescriptor& family);

/// One dataset per family, generated in parallel and returned in family order.
std::vector<Dataset> build_datasets(const FamilyGrid& grid, unsigned jobs = 1);

/// Mean over samples and nodes of the squared prediction error.
double mse(const ModelParams& params, const Dataset& dataset);

struct CellMeta {
  std::string train_family;
  std::string test_family;
  std::uint64_t chosen_seed = 0;
  double train_mse = 0.0;
};

struct RunRecord {
  std::size_t row = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  double train_mse = 0.0;
  std::string message;
};

struct EvalGrid {
  std::vector<std::string> names;
  /// mse(i, j): trained on family i, tested on family j. Rows whose runs all
  /// diverged hold NaN and are listed in failed_rows.
  Eigen::MatrixXd mse;
  /// Row-major, names.size()^2 entries.
  std::vector<CellMeta> meta;
  std::vector<RunRecord> runs;
  std::vector<std::size_t> failed_rows;

  const CellMeta& cell(std::size_t i, std::size_t j) const { return meta[i * names.size() + j]; }
};

/// Trains every (family, seed) pair, keeps the lowest train MSE per family and
/// evaluates it on every family. Deterministic for a fixed grid.
EvalGrid cross_eval(ModelKind kind, const FamilyGrid& grid, const TrainConfig& config,
                    unsigned jobs = 1);
EvalGrid cross_eval(ModelKind kind, const FamilyGrid& grid, const std::vector<Dataset>& datasets,
                    const TrainConfig& config, unsigned jobs = 1);

/// Declared containment span(test) within span(train).
bool subspace_contained(const FamilyDescriptor& test, const FamilyDescriptor& train);

struct ContainmentViolation {
  std::size_t row = 0;
  std::size_t col = 0;
  double ratio = 0.0;
};

/// Cells with contained test family whose MSE exceeds wiggle x train MSE.
std::vector<ContainmentViolation> containment_violations(const EvalGrid& grid,
                                                         const std::vector<FamilyDescriptor>& families,
                                                         double wiggle = 10.0);

struct TheoryOptions {
  Family family = Family::Polynomial;
  std::size_t n_samples = 1000;
  std::uint64_t data_seed = 0;
  long long gd_steps = 3'000'000;
  double k = 1.0;
  unsigned jobs = 1;
};

struct TheoryRow {
  int p = 0;
  /// ||W_T - A||_F / ||A||_F after theorem-mode training from W0 = 0.
  double linear_empirical = 0.0;
  /// Same quantity for the fixed point A U U^T.
  double linear_predicted = 0.0;
  /// |w - k| / k of the least-squares stencil fit.
  double fd_empirical = 0.0;
  double fd_predicted_forcing = 0.0;
  double fd_predicted_solution = 0.0;
};

struct TheoryReport {
  int n_grid = 0;
  int q = 2;
  std::vector<TheoryRow> rows;
};

TheoryReport theory_comparison(const std::vector<int>& p_range, int n_grid, int q,
                               const TheoryOptions& options = {});

struct StencilInverse {
  bool invertible = false;
  double condition = 0.0;
  Eigen::MatrixXd l_hat;
  /// In [0, 1]; zero when the matrix was not inverted.
  double bandedness = 0.0;
};

/// Fraction of squared Frobenius mass within |i - j| <= 1.
double bandedness(const Eigen::MatrixXd& m);

StencilInverse invert_weights(const Eigen::MatrixXd& w, double max_condition = 1e12);

struct ProbeResult {
  /// Column j is the response to e_j, minus the response to 0 for nonlinear models.
  Eigen::MatrixXd g_hat;
  /// Column j is the raw response to e_j.
  Eigen::MatrixXd g_raw;
  Eigen::MatrixXd reference;
  double relative_error = 0.0;
  std::optional<StencilInverse> inverse;
};

ProbeResult probe_greens(const ModelParams& params, const Grid& grid,
                         const Eigen::MatrixXd& reference, bool invert = true);

struct SweepRow {
  int q = 2;
  int n_grid = 0;
  int p = 0;
  double w = 0.0;
  double train_mse = 0.0;
  double relative_error = 0.0;
};

struct SweepOptions {
  Family family = Family::Polynomial;
  std::size_t n_samples = 1000;
  std::uint64_t data_seed = 0;
  double k = 1.0;
  unsigned jobs = 1;
};

std::vector<SweepRow> fd_grid_sweep(const std::vector<int>& q_list, const std::vector<int>& n_grid_list,
                                    const std::vector<int>& p_list, const SweepOptions& options = {});

/// Least-squares slope of log(err) against log(dx).
double fit_convergence_order(const std::vector<double>& dx, const std::vector<double>& err);

// Report emission.

/// 25x25 table with family names along both axes; rows are training families.
void write_evalgrid_csv(const EvalGrid& grid, const std::filesystem::path& path);

/// Self-contained SVG, log10 colour scale clamped to [-14, 2].
void emit_heatmap(const EvalGrid& grid, const std::vector<FamilyDescriptor>& families,
                  const std::filesystem::path& path);

/// Writes evalgrid.csv, evalgrid.svg, cells.csv, runs.csv and report.txt into `dir`.
void emit_report(const EvalGrid& grid, const std::vector<FamilyDescriptor>& families,
                 const std::filesystem::path& dir, double wiggle = 10.0);

void write_theory_csv(const TheoryReport& report, const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

/// Colour for log10 value `v`, as "#rrggbb".
std::string heat_colour(double value);

}  // namespace genbench
