#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "genbench/error.hpp"
#include "genbench/harness.hpp"
#include "genbench/keyvalue.hpp"
#include "genbench/oracle.hpp"
#include "test_util.hpp"

using namespace genbench;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<std::string> cell_fills(const std::string& svg) {
  std::vector<std::string> out;
  const std::regex re("class=\"cell\"[^>]*fill=\"(#[0-9a-f]{6})\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
    out.push_back((*it)[1]);
  return out;
}

EvalGrid constant_grid(const std::vector<FamilyDescriptor>& fams, double v) {
  EvalGrid g;
  for (const auto& f : fams) g.names.push_back(f.name());
  const auto n = static_cast<Eigen::Index>(fams.size());
  g.mse = Eigen::MatrixXd::Constant(n, n, v);
  g.meta.resize(fams.size() * fams.size());
  for (std::size_t i = 0; i < fams.size(); ++i)
    for (std::size_t j = 0; j < fams.size(); ++j) {
      g.meta[i * fams.size() + j] = {g.names[i], g.names[j], 0, v};
    }
  return g;
}

TrainConfig quick_linear() {
  TrainConfig c = default_train_config(ModelKind::Linear);
  c.budget = 300;
  return c;
}

}  // namespace

TEST(Families, StandardOrdering) {
  const auto fams = standard_families();
  ASSERT_EQ(fams.size(), 25u);
  EXPECT_EQ(fams[0].name(), "fem");
  EXPECT_EQ(fams[1].name(), "poly1");
  EXPECT_EQ(fams[8].name(), "poly8");
  EXPECT_EQ(fams[9].name(), "cos1");
  EXPECT_EQ(fams[17].name(), "sine1");
  EXPECT_EQ(fams[24].name(), "sine8");
  for (const auto& f : fams) EXPECT_EQ(parse_descriptor(f.name()), f);
  EXPECT_FALSE(parse_descriptor("poly0").has_value());
  EXPECT_FALSE(parse_descriptor("tan3").has_value());
  EXPECT_FALSE(parse_descriptor("poly").has_value());
}

TEST(Families, GridValidation) {
  FamilyGrid g;
  EXPECT_NO_THROW(g.validate());
  g.families.push_back(g.families[3]);
  EXPECT_THROW_KIND(g.validate(), ErrorKind::InvalidSpec);
  FamilyGrid h;
  h.seeds.clear();
  EXPECT_THROW_KIND(h.validate(), ErrorKind::InvalidSpec);
  FamilyGrid k;
  k.n_grid = 1;
  EXPECT_THROW_KIND(k.validate(), ErrorKind::InvalidGrid);
}

TEST(Families, DatasetSeedsDifferPerFamily) {
  std::set<std::uint64_t> seen;
  for (const auto& f : standard_families()) seen.insert(dataset_seed(0, f));
  EXPECT_EQ(seen.size(), 25u);
  EXPECT_NE(dataset_seed(0, {Family::Sine, 2}), dataset_seed(1, {Family::Sine, 2}));
}

TEST(Mse, ExactOperatorOnFem) {
  const Dataset ds = generate_dataset(Family::FemPiecewiseLinear, 0, 22, 500, 0);
  auto p = init_model(ModelKind::Linear, 21, 0, InitScheme::Zeros);
  p.at("W") = assemble_green_matrix(ds.grid).data;
  EXPECT_LT(mse(p, ds), 1e-20);
  EXPECT_EQ(mse(p, ds), mse(p, ds));
}

TEST(Mse, ZeroModelFromNorms) {
  const Dataset ds = generate_dataset(Family::Sine, 3, 22, 400, 0);
  const auto p = init_model(ModelKind::Linear, 21, 0, InitScheme::Zeros);
  EXPECT_NEAR(mse(p, ds), ds.u.squaredNorm() / (400.0 * 21.0), 1e-15);
}

TEST(Mse, GridMismatch) {
  const Dataset ds = generate_dataset(Family::Sine, 3, 12, 10, 0);
  EXPECT_THROW_KIND(mse(init_model(ModelKind::Linear, 21, 0, InitScheme::Zeros), ds),
                    ErrorKind::Incompatible);
}

TEST(CrossEval, DeterministicAndJobIndependent) {
  FamilyGrid g;
  g.families = {{Family::Polynomial, 2}, {Family::Sine, 2}, {Family::FemPiecewiseLinear, 0}};
  g.n_grid = 8;
  g.n_samples = 100;
  g.seeds = {0, 1};
  TrainConfig c = default_train_config(ModelKind::DeepLinear);
  c.budget = 40;
  const EvalGrid a = cross_eval(ModelKind::DeepLinear, g, c, 1);
  const EvalGrid b = cross_eval(ModelKind::DeepLinear, g, c, 4);
  ASSERT_EQ(a.mse.rows(), 3);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_EQ(a.mse(i, j), b.mse(i, j));
  for (std::size_t i = 0; i < a.meta.size(); ++i) EXPECT_EQ(a.meta[i].chosen_seed, b.meta[i].chosen_seed);
  EXPECT_EQ(a.runs.size(), 6u);
  EXPECT_GE(a.mse.minCoeff(), 0.0);
}

TEST(CrossEval, DiagonalIsChosenRunsTrainMse) {
  FamilyGrid g;
  g.families = {{Family::Cosine, 1}, {Family::Cosine, 3}, {Family::Polynomial, 4}};
  g.n_grid = 10;
  g.n_samples = 150;
  g.seeds = {0, 1, 2};
  TrainConfig c = default_train_config(ModelKind::Mlp);
  c.shape.hidden = 16;
  c.budget = 20;
  c.batch_size = 50;
  const EvalGrid e = cross_eval(ModelKind::Mlp, g, c, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    const CellMeta& m = e.cell(i, i);
    EXPECT_NEAR(e.mse(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)), m.train_mse, 1e-9);
    double best = INFINITY;
    for (const auto& r : e.runs)
      if (r.row == i) best = std::min(best, r.train_mse);
    EXPECT_EQ(m.train_mse, best);
    EXPECT_EQ(m.train_family, e.names[i]);
  }
}

TEST(CrossEval, LinearBlockStructureAndFemRow) {
  FamilyGrid g;
  g.families = {{Family::FemPiecewiseLinear, 0}, {Family::Polynomial, 1}, {Family::Polynomial, 2},
                {Family::Polynomial, 3}, {Family::Sine, 2}, {Family::Cosine, 2}};
  g.n_samples = 1000;
  g.seeds = {0};
  const EvalGrid e = cross_eval(ModelKind::Linear, g, default_train_config(ModelKind::Linear), 4);
  for (Eigen::Index j = 0; j < 6; ++j) EXPECT_LE(e.mse(0, j), 1e-3) << e.names[j];
  // Linear forcing with nonzero ends is outside the interior hat span, so the
  // declared poly1-in-FEM pair is the one reported violation.
  const auto v = containment_violations(e, g.families, 10.0);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].row, 0u);
  EXPECT_EQ(v[0].col, 1u);
  // Poly3 -> Poly1, Poly2 are contained; poly1 -> poly3 is not.
  EXPECT_LE(e.mse(3, 1), 10 * e.cell(3, 3).train_mse);
  EXPECT_GT(e.mse(1, 3), 1e3 * e.cell(1, 1).train_mse);
}

TEST(CrossEval, TheoremModeSubspaceGeneralization) {
  FamilyGrid g;
  g.families = {{Family::Sine, 1}, {Family::Sine, 2}, {Family::Sine, 3}, {Family::Cosine, 2}};
  g.n_samples = 500;
  g.seeds = {0};
  const EvalGrid e = cross_eval(ModelKind::Linear, g, theorem_mode_config(20000), 4);
  const auto v = containment_violations(e, g.families, 10.0);
  for (const auto& x : v) ADD_FAILURE() << e.names[x.row] << " -> " << e.names[x.col] << " ratio " << x.ratio;
}

TEST(CrossEval, AllDivergedRowsAreReported) {
  FamilyGrid g;
  g.families = {{Family::Polynomial, 2}, {Family::Sine, 2}};
  g.n_grid = 8;
  g.n_samples = 50;
  g.seeds = {0, 1};
  TrainConfig c = default_train_config(ModelKind::Linear);
  c.optimizer = OptimizerKind::PlainGD;
  c.lr = LrSchedule{LrScheduleKind::Constant, 1e5, 1e5, 0, 1, 1.0};
  c.budget = 400;
  const EvalGrid e = cross_eval(ModelKind::Linear, g, c, 2);
  EXPECT_EQ(e.failed_rows.size(), 2u);
  for (const auto& r : e.runs) {
    EXPECT_TRUE(r.diverged);
    EXPECT_FALSE(r.message.empty());
  }
  EXPECT_TRUE(std::isnan(e.mse(0, 1)));
  TempDir dir;
  emit_report(e, g.families, dir.path());
  const KeyValue kv = KeyValue::read(dir / "report.txt");
  EXPECT_EQ(kv.get("diverged_runs"), "4");
  EXPECT_EQ(kv.get("failed_rows"), "poly2,sine2");
}

TEST(CrossEval, RejectsMixedGrids) {
  FamilyGrid g;
  g.families = {{Family::Polynomial, 2}, {Family::Sine, 2}};
  g.n_grid = 8;
  std::vector<Dataset> ds{generate_dataset(Family::Polynomial, 2, 8, 10, 0),
                          generate_dataset(Family::Sine, 2, 10, 10, 0)};
  EXPECT_THROW_KIND(cross_eval(ModelKind::Linear, g, ds, quick_linear()), ErrorKind::Incompatible);
}

TEST(Containment, DeclaredRelation) {
  const FamilyDescriptor fem{Family::FemPiecewiseLinear, 0}, p1{Family::Polynomial, 1},
      p3{Family::Polynomial, 3}, s2{Family::Sine, 2}, s4{Family::Sine, 4}, c2{Family::Cosine, 2};
  EXPECT_TRUE(subspace_contained(p1, p3));
  EXPECT_FALSE(subspace_contained(p3, p1));
  EXPECT_TRUE(subspace_contained(s2, s4));
  EXPECT_TRUE(subspace_contained(p1, fem));
  EXPECT_FALSE(subspace_contained(p3, fem));
  EXPECT_FALSE(subspace_contained(c2, s4));
  EXPECT_FALSE(subspace_contained(fem, p3));
  EXPECT_TRUE(subspace_contained(c2, c2));
}

TEST(Theory, LinearMatchesPredictionForLowOrders) {
  TheoryOptions o;
  o.gd_steps = 1000000;
  o.jobs = 4;
  const auto r = theory_comparison({1, 2, 3, 4}, 22, 2, o);
  for (const auto& row : r.rows) {
    EXPECT_NEAR(row.linear_empirical / row.linear_predicted, 1.0, 0.1) << row.p;
    EXPECT_GE(row.fd_predicted_solution + 1e-12, row.fd_empirical) << row.p;
  }
}

TEST(Theory, FdTrendMatches) {
  TheoryOptions o;
  o.gd_steps = 10;
  o.jobs = 4;
  const auto r = theory_comparison({2, 3, 4, 5, 6, 7, 8}, 22, 2, o);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    EXPECT_GE(row.fd_predicted_solution + 1e-12, row.fd_empirical) << row.p;
    if (i > 0) {
      EXPECT_GT(row.fd_empirical, r.rows[i - 1].fd_empirical) << row.p;
      EXPECT_GT(row.fd_predicted_solution, r.rows[i - 1].fd_predicted_solution) << row.p;
    }
  }
}

TEST(Theory, FullRankLimit) {
  TheoryOptions o;
  o.family = Family::FemPiecewiseLinear;
  o.gd_steps = 200000;
  const auto r = theory_comparison({0}, 8, 2, o);
  EXPECT_LT(r.rows[0].linear_predicted, 1e-6);
  EXPECT_LT(r.rows[0].linear_empirical, 1e-6);
}

TEST(Bandedness, Basics) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 6; ++i) {
    t(i, i) = 2;
    if (i > 0) t(i, i - 1) = -1;
    if (i < 5) t(i, i + 1) = -1;
  }
  EXPECT_EQ(bandedness(t), 1.0);
  EXPECT_EQ(bandedness(Eigen::MatrixXd::Zero(3, 3)), 0.0);
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    Eigen::MatrixXd m(7, 7);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    const double b = bandedness(m);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0);
  }
}

TEST(InvertWeights, GreenMatrixInvertsToStencil) {
  const Grid g = make_grid(22);
  const auto inv = invert_weights(assemble_green_matrix(g).data);
  ASSERT_TRUE(inv.invertible);
  EXPECT_GT(inv.bandedness, 0.9);
  const Eigen::MatrixXd expected = mass_matrix(g).inverse() * stiffness_matrix(g);
  EXPECT_LT((inv.l_hat - expected).norm() / expected.norm(), 1e-9);
}

TEST(InvertWeights, LowRankIsFlagged) {
  const Grid g = make_grid(22);
  const auto a = assemble_green_matrix(g);
  const auto u = orthonormal_range(assemble_basis(Family::Polynomial, 2, g));
  const auto w = predict_w_star(a, u, Eigen::MatrixXd::Zero(21, 21));
  const auto inv = invert_weights(w.data);
  EXPECT_FALSE(inv.invertible);
  EXPECT_GT(inv.condition, 1e12);
  EXPECT_EQ(inv.bandedness, 0.0);
  EXPECT_THROW_KIND(invert_weights(Eigen::MatrixXd::Zero(2, 3)), ErrorKind::ShapeMismatch);
}

TEST(Probe, LinearIsBitExact) {
  auto p = init_model(ModelKind::Linear, 9, 3, InitScheme::FanInUniform);
  const Grid g = make_grid(10);
  const auto r = probe_greens(p, g, assemble_green_matrix(g).data);
  EXPECT_EQ(r.g_hat, p.at("W"));
  EXPECT_EQ(r.g_raw, p.at("W"));
  // The generic one-hot path agrees with the weight matrix too.
  RowMatrix eye = RowMatrix::Identity(9, 9);
  EXPECT_EQ(Eigen::MatrixXd(forward(p, eye, g).transpose()), p.at("W"));
}

TEST(Probe, FemTrainedLinearRecoversGreen) {
  const Dataset ds = generate_dataset(Family::FemPiecewiseLinear, 0, 22, 1000, 0);
  const auto r = train(ModelKind::Linear, ds, default_train_config(ModelKind::Linear));
  const auto a = assemble_green_matrix(ds.grid).data;
  const auto probe = probe_greens(r.params, ds.grid, a);
  EXPECT_LT(probe.relative_error, 1e-3);
  ASSERT_TRUE(probe.inverse.has_value());
  EXPECT_TRUE(probe.inverse->invertible);
  EXPECT_GT(probe.inverse->bandedness, 0.8);
}

TEST(Probe, PolyTrainedMlpDoesNotRecoverGreen) {
  const Dataset ds = generate_dataset(Family::Polynomial, 3, 22, 1000, 0);
  TrainConfig c = default_train_config(ModelKind::Mlp);
  c.budget = 100;
  const auto r = train(ModelKind::Mlp, ds, c);
  const auto probe = probe_greens(r.params, ds.grid, assemble_green_matrix(ds.grid).data);
  EXPECT_GT(probe.relative_error, 0.1);
  EXPECT_LT(r.history.final_mse, 1e-2);
}

TEST(Probe, BiasRemovalForNonlinearModels) {
  const Grid g = make_grid(8);
  auto p = init_model(ModelKind::DeepLinear, 7, 1, InitScheme::FanInUniform, {.hidden = 9});
  p.at("b2").setConstant(5.0);
  const auto r = probe_greens(p, g, assemble_green_matrix(g).data, false);
  const Eigen::MatrixXd w = p.at("W2") * p.at("W1");
  EXPECT_LT((r.g_hat - w).norm(), 1e-12);
  EXPECT_LT((r.g_raw - r.g_hat - Eigen::MatrixXd::Constant(7, 7, 5.0)).norm(), 1e-12);
  EXPECT_FALSE(r.inverse.has_value());
  EXPECT_THROW_KIND(probe_greens(init_model(ModelKind::FdFit, 7, 0, InitScheme::Zeros), g, w),
                    ErrorKind::Incompatible);
}

TEST(Sweep, ConvergenceBehaviour) {
  SweepOptions o;
  o.n_samples = 500;
  o.jobs = 4;
  const auto rows = fd_grid_sweep({2, 4}, {8, 16, 32, 64}, {1, 3, 5}, o);
  ASSERT_EQ(rows.size(), 24u);
  auto at = [&](int q, int n, int p) {
    for (const auto& r : rows)
      if (r.q == q && r.n_grid == n && r.p == p) return r;
    throw std::runtime_error("missing row");
  };
  for (int n : {8, 16, 32, 64}) EXPECT_LT(at(2, n, 1).relative_error, 1e-12) << n;
  for (int n : {16, 32, 64}) {
    EXPECT_LT(at(2, n, 3).relative_error, at(2, n / 2, 3).relative_error) << n;
    EXPECT_LT(at(4, n, 5).relative_error, at(2, n, 5).relative_error) << n;
  }
  std::vector<double> dx, e2, e4;
  for (int n : {8, 16, 32, 64}) {
    dx.push_back(1.0 / n);
    e2.push_back(at(2, n, 5).relative_error);
    e4.push_back(at(4, n, 5).relative_error);
  }
  EXPECT_GT(fit_convergence_order(dx, e4), fit_convergence_order(dx, e2));
}

TEST(ConvergenceOrder, Synthetic) {
  const std::vector<double> dx{0.5, 0.25, 0.125, 0.0625};
  std::vector<double> e2, e4;
  for (double d : dx) {
    e2.push_back(d * d);
    e4.push_back(3 * std::pow(d, 4));
  }
  EXPECT_NEAR(fit_convergence_order(dx, e2), 2.0, 1e-9);
  EXPECT_NEAR(fit_convergence_order(dx, e4), 4.0, 1e-9);
  EXPECT_THROW_KIND(fit_convergence_order({0.1, 0.2}, {1, 2}), ErrorKind::Domain);
  EXPECT_THROW_KIND(fit_convergence_order({0.1, 0.2, 0.3}, {1, 0, 2}), ErrorKind::Domain);
}

TEST(ConvergenceOrder, FdSecondOrderOnCubicData) {
  std::vector<double> dx, err;
  for (int n : {16, 32, 64, 128}) {
    const Dataset ds = generate_dataset(Family::Polynomial, 3, n, 500, 7);
    dx.push_back(1.0 / n);
    err.push_back(std::abs(fit_fd_parameter(ds, 2) - 1.0));
  }
  const double slope = fit_convergence_order(dx, err);
  EXPECT_GE(slope, 1.8);
  EXPECT_LE(slope, 2.2);
}

TEST(Heatmap, StructureOfStandardGrid) {
  TempDir dir;
  const auto fams = standard_families();
  EvalGrid g = constant_grid(fams, 1e-3);
  emit_heatmap(g, fams, dir / "h.svg");
  const std::string svg = slurp(dir / "h.svg");
  EXPECT_EQ(count(svg, "class=\"cell\""), 625u);
  // Three internal boundaries (fem|poly, poly|cos, cos|sine) in both directions.
  EXPECT_EQ(count(svg, "class=\"sep\""), 6u);
  const auto fills = cell_fills(svg);
  ASSERT_EQ(fills.size(), 625u);
  EXPECT_EQ(std::set<std::string>(fills.begin(), fills.end()).size(), 1u);
}

TEST(Heatmap, LogScaleSeparatesBands) {
  TempDir dir;
  std::vector<FamilyDescriptor> fams{{Family::Sine, 1}, {Family::Sine, 2}, {Family::Sine, 3}, {Family::Sine, 4}};
  EvalGrid g = constant_grid(fams, 1.0);
  g.mse.topRows(2).setConstant(1e-12);
  emit_heatmap(g, fams, dir / "h.svg");
  const auto fills = cell_fills(slurp(dir / "h.svg"));
  ASSERT_EQ(fills.size(), 16u);
  EXPECT_EQ(std::set<std::string>(fills.begin(), fills.begin() + 8).size(), 1u);
  EXPECT_EQ(std::set<std::string>(fills.begin() + 8, fills.end()).size(), 1u);
  EXPECT_NE(fills[0], fills[15]);
  EXPECT_EQ(heat_colour(1e-20), heat_colour(1e-14));
  EXPECT_EQ(heat_colour(1e5), heat_colour(1e2));
  EXPECT_NE(heat_colour(1e-14), heat_colour(1e2));
  EXPECT_EQ(heat_colour(std::nan("")), "#bbbbbb");
}

TEST(Report, FilesAndSummary) {
  TempDir dir;
  FamilyGrid g;
  g.families = {{Family::Polynomial, 1}, {Family::Polynomial, 3}, {Family::Sine, 2}};
  g.n_grid = 12;
  g.n_samples = 200;
  g.seeds = {0};
  const EvalGrid e = cross_eval(ModelKind::Linear, g, quick_linear(), 2);
  emit_report(e, g.families, dir.path());
  for (const char* f : {"evalgrid.csv", "evalgrid.svg", "cells.csv", "runs.csv", "report.txt"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const std::string csv = slurp(dir / "evalgrid.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "train\\test,poly1,poly3,sine2");
  EXPECT_EQ(count(csv, "\n"), 4u);
  const KeyValue kv = KeyValue::read(dir / "report.txt");
  EXPECT_EQ(kv.get("families"), "3");
  EXPECT_EQ(kv.get("contained_cells"), "1");
  EXPECT_TRUE(kv.contains("row.poly3.diagonal_mse"));
}
