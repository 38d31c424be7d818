#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "genbench/checkpoint.hpp"
#include "genbench/datasets.hpp"
#include "genbench/error.hpp"
#include "genbench/oracle.hpp"
#include "genbench/rng.hpp"
#include "genbench/training.hpp"
#include "test_util.hpp"

using namespace genbench;

namespace {

Eigen::MatrixXd projector(Family f, int p, const Grid& g) {
  return range_projector(orthonormal_range(assemble_basis(f, p, g)));
}

}  // namespace

TEST(LrSchedule, LinearEndpoints) {
  LrSchedule s{LrScheduleKind::Linear, 1e-1, 1e-6, 11, 0, 1.0};
  EXPECT_DOUBLE_EQ(s.at(0), 1e-1);
  EXPECT_DOUBLE_EQ(s.at(10), 1e-6);
  EXPECT_DOUBLE_EQ(s.at(50), 1e-6);
  EXPECT_NEAR(s.at(5), 0.5 * (1e-1 + 1e-6), 1e-15);
  for (long long i = 1; i < 11; ++i) EXPECT_LT(s.at(i), s.at(i - 1));
}

TEST(LrSchedule, StepDecay) {
  LrSchedule s{LrScheduleKind::Step, 1e-3, 1e-6, 0, 5000, 0.1};
  EXPECT_DOUBLE_EQ(s.at(0), 1e-3);
  EXPECT_DOUBLE_EQ(s.at(4999), 1e-3);
  EXPECT_NEAR(s.at(5000), 1e-4, 1e-18);
  EXPECT_NEAR(s.at(10000), 1e-5, 1e-19);
  EXPECT_DOUBLE_EQ(s.at(1000000), 1e-6);
}

TEST(LrSchedule, ConstantAndNames) {
  LrSchedule s{LrScheduleKind::Constant, 0.3, 0.3, 1, 1, 1.0};
  EXPECT_EQ(s.at(0), 0.3);
  EXPECT_EQ(s.at(99), 0.3);
  for (auto k : {LrScheduleKind::Linear, LrScheduleKind::Step, LrScheduleKind::Constant})
    EXPECT_EQ(parse_schedule(schedule_name(k)), k);
  EXPECT_EQ(parse_optimizer(optimizer_name(OptimizerKind::PlainGD)), OptimizerKind::PlainGD);
  EXPECT_FALSE(parse_optimizer("lbfgs").has_value());
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  auto expect_bad = [](TrainConfig bad) { EXPECT_THROW_KIND(bad.validate(), ErrorKind::InvalidSpec); };
  TrainConfig c1 = c;
  c1.lr.start = 1e-7;
  expect_bad(c1);
  TrainConfig c2 = c;
  c2.lr.end = 0.0;
  expect_bad(c2);
  TrainConfig c3 = c;
  c3.budget = 0;
  expect_bad(c3);
  TrainConfig c4 = c;
  c4.beta1 = 1.0;
  expect_bad(c4);
  TrainConfig c5 = c;
  c5.eval_every = 0;
  expect_bad(c5);
  EXPECT_NO_THROW(theorem_mode_config(10).validate());
}

TEST(TrainConfig, TableDefaults) {
  const auto lin = default_train_config(ModelKind::Linear);
  EXPECT_EQ(lin.optimizer, OptimizerKind::AdamW);
  EXPECT_EQ(lin.batch_size, 0);
  EXPECT_EQ(lin.budget, 2000);
  EXPECT_EQ(lin.unit, BudgetUnit::Epochs);
  EXPECT_EQ(lin.init, InitScheme::Zeros);
  EXPECT_DOUBLE_EQ(lin.lr.start, 1e-1);
  EXPECT_DOUBLE_EQ(lin.lr.end, 1e-6);

  const auto mlp = default_train_config(ModelKind::Mlp);
  EXPECT_EQ(mlp.batch_size, 256);
  EXPECT_EQ(mlp.budget, 5000);
  EXPECT_DOUBLE_EQ(mlp.lr.start, 1e-2);
  EXPECT_EQ(mlp.lr.kind, LrScheduleKind::Linear);

  const auto don = default_train_config(ModelKind::DeepONet);
  EXPECT_EQ(don.batch_size, 256);
  EXPECT_EQ(don.lr.kind, LrScheduleKind::Step);
  EXPECT_EQ(don.unit, BudgetUnit::Steps);

  const auto th = theorem_mode_config(1000);
  EXPECT_EQ(th.optimizer, OptimizerKind::PlainGD);
  EXPECT_EQ(th.weight_decay, 0.0);
  EXPECT_EQ(th.batch_size, 0);
  EXPECT_EQ(th.init, InitScheme::Zeros);
  EXPECT_FALSE(th.select_best);
}

TEST(TrainConfig, KeyValueRoundTripAndHash) {
  TrainConfig c = default_train_config(ModelKind::DeepONet);
  c.seed = 42;
  c.weight_decay = 0.01;
  c.shape.output_bias = true;
  const TrainConfig back = config_from_keyvalue(config_to_keyvalue(c), TrainConfig{});
  EXPECT_EQ(config_to_keyvalue(back).serialize(), config_to_keyvalue(c).serialize());
  EXPECT_EQ(config_hash(back), config_hash(c));
  TrainConfig d = c;
  d.lr.start = 2e-3;
  EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Train, LinearPaperModeReachesTinyTrainError) {
  const Dataset ds = generate_dataset(Family::Sine, 5, 22, 1000, 0);
  const auto r = train(ModelKind::Linear, ds, default_train_config(ModelKind::Linear));
  EXPECT_LT(r.history.final_mse, 1e-10);
  EXPECT_EQ(r.history.steps, 2000);
}

TEST(Train, HistoryBookkeeping) {
  const Dataset ds = generate_dataset(Family::Cosine, 2, 12, 100, 0);
  TrainConfig c = default_train_config(ModelKind::DeepLinear);
  c.budget = 30;
  c.eval_every = 7;
  const auto r = train(ModelKind::DeepLinear, ds, c);
  const auto& h = r.history;
  ASSERT_FALSE(h.epoch_mse.empty());
  EXPECT_EQ(h.epoch_index.front(), 0);
  EXPECT_EQ(h.epoch_index.back(), 30);
  EXPECT_EQ(h.epoch_mse.size(), h.epoch_index.size());
  EXPECT_EQ(h.best_mse, *std::min_element(h.epoch_mse.begin(), h.epoch_mse.end()));
  for (double v : h.epoch_mse) EXPECT_GE(v, 0.0);
  EXPECT_DOUBLE_EQ(h.final_mse, h.best_mse);
  EXPECT_NEAR(model_mse(r.params, ds.f, ds.u, ds.grid), h.best_mse, 1e-15);
  EXPECT_GE(h.wall_seconds, 0.0);
}

TEST(Train, DeterministicPerSeed) {
  const Dataset ds = generate_dataset(Family::Polynomial, 2, 10, 300, 0);
  TrainConfig c = default_train_config(ModelKind::Mlp);
  c.shape.hidden = 16;
  c.budget = 3;
  c.batch_size = 64;
  const auto a = train(ModelKind::Mlp, ds, c);
  const auto b = train(ModelKind::Mlp, ds, c);
  for (const auto& [name, t] : a.params.tensors) EXPECT_EQ(t, b.params.at(name)) << name;
  c.seed = 1;
  const auto d = train(ModelKind::Mlp, ds, c);
  EXPECT_NE(a.params.at("W1"), d.params.at("W1"));
}

TEST(Train, MinibatchStepCount) {
  const Dataset ds = generate_dataset(Family::Polynomial, 2, 10, 300, 0);
  TrainConfig c = default_train_config(ModelKind::DeepONet);
  c.shape.hidden = 8;
  c.budget = 5;
  const auto r = train(ModelKind::DeepONet, ds, c);
  EXPECT_EQ(r.history.steps, 5);
  c.unit = BudgetUnit::Epochs;
  c.budget = 2;
  EXPECT_EQ(train(ModelKind::DeepONet, ds, c).history.steps, 4);
}

TEST(Train, FdFitIsClosedForm) {
  const Dataset ds = generate_dataset(Family::Polynomial, 4, 22, 200, 0);
  const auto r = train(ModelKind::FdFit, ds, default_train_config(ModelKind::FdFit));
  EXPECT_EQ(r.params.at("w")(0, 0), fit_fd_parameter(ds, 2));
}

TEST(Train, TheoremModeReachesProjectedFixedPoint) {
  const Dataset ds = generate_dataset(Family::Polynomial, 3, 22, 1000, 0);
  const auto r = train(ModelKind::Linear, ds, theorem_mode_config(200000));
  const auto a = consistent_green_matrix(Family::Polynomial, 3, ds.grid);
  const auto u = orthonormal_range(assemble_basis(Family::Polynomial, 3, ds.grid));
  const auto w_star = predict_w_star(a, u, Eigen::MatrixXd::Zero(21, 21));
  EXPECT_LT((r.params.at("W") - w_star.data).norm() / a.data.norm(), 1e-6);
  EXPECT_GT(r.history.effective_lr, 0.0);
}

TEST(Train, GradientDescentPreservesOrthogonalComponent) {
  const Dataset ds = generate_dataset(Family::Sine, 4, 22, 500, 0);
  const Eigen::MatrixXd proj = projector(Family::Sine, 4, ds.grid);
  const Eigen::MatrixXd comp = Eigen::MatrixXd::Identity(21, 21) - proj;
  ModelParams w0 = init_model(ModelKind::Linear, 21, 9, InitScheme::FanInUniform);
  const Eigen::MatrixXd start = w0.at("W");
  for (long long steps : {1LL, 10LL, 5000LL}) {
    const auto r = train_from(w0, ds, theorem_mode_config(steps));
    EXPECT_LT(((r.params.at("W") - start) * comp).norm(), 1e-8) << steps;
  }
  // Same property through the generic minibatch path.
  TrainConfig c = theorem_mode_config(50);
  c.batch_size = 100;
  c.auto_lr = false;
  c.lr = LrSchedule{LrScheduleKind::Constant, 1e-5, 1e-5, 0, 1, 1.0};
  const auto r = train_from(w0, ds, c);
  EXPECT_LT(((r.params.at("W") - start) * comp).norm(), 1e-8);
}

TEST(Train, DivergenceReportsEpochAndRate) {
  const Dataset ds = generate_dataset(Family::Polynomial, 3, 22, 200, 0);
  TrainConfig c = default_train_config(ModelKind::Linear);
  c.optimizer = OptimizerKind::PlainGD;
  c.lr = LrSchedule{LrScheduleKind::Constant, 1e4, 1e4, 0, 1, 1.0};
  c.budget = 500;
  try {
    train(ModelKind::Linear, ds, c);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Divergence);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("lr"), std::string::npos);
  }
}

TEST(Train, RejectsMismatchedInitialParams) {
  const Dataset ds = generate_dataset(Family::Sine, 2, 10, 20, 0);
  EXPECT_THROW_KIND(train_from(init_model(ModelKind::Linear, 5, 0, InitScheme::Zeros), ds,
                               default_train_config(ModelKind::Linear)),
                    ErrorKind::Incompatible);
}

TEST(Checkpoint, RoundTrip) {
  TempDir dir;
  const Dataset ds = generate_dataset(Family::Sine, 2, 10, 50, 0);
  TrainConfig c = default_train_config(ModelKind::DeepONet);
  c.shape.hidden = 6;
  c.shape.output_bias = true;
  c.budget = 3;
  const auto r = train(ModelKind::DeepONet, ds, c);
  write_checkpoint(dir.path(), r.params, 10, c, r.history.final_mse);
  const Checkpoint ck = read_checkpoint(dir.path());
  EXPECT_EQ(ck.n_grid, 10);
  EXPECT_EQ(ck.params.kind, ModelKind::DeepONet);
  EXPECT_EQ(ck.params.shape.hidden, 6);
  EXPECT_TRUE(ck.params.shape.output_bias);
  EXPECT_EQ(ck.train_mse, r.history.final_mse);
  for (const auto& [name, t] : r.params.tensors) EXPECT_EQ(t, ck.params.at(name)) << name;
  const Eigen::VectorXd f = ds.sample(0).f;
  EXPECT_EQ(forward(ck.params, f, ds.grid), forward(r.params, f, ds.grid));
}

TEST(Checkpoint, CorruptTensorRejected) {
  TempDir dir;
  const auto p = init_model(ModelKind::Linear, 5, 0, InitScheme::FanInUniform);
  write_checkpoint(dir.path(), p, 6, default_train_config(ModelKind::Linear), 0.5);
  std::filesystem::resize_file(dir / "W.bin", 16);
  EXPECT_THROW_KIND(read_checkpoint(dir.path()), ErrorKind::Io);
  EXPECT_THROW_KIND(read_checkpoint(dir / "missing"), ErrorKind::Io);
}
