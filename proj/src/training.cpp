#include "genbench/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "genbench/error.hpp"
#include "genbench/rng.hpp"

namespace genbench {

namespace {

using Eigen::MatrixXd;

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr double kAutoLrFactor = 1.8;

long long batches_per_epoch(std::size_t n, int batch_size) {
  if (batch_size <= 0 || static_cast<std::size_t>(batch_size) >= n) return 1;
  return static_cast<long long>((n + static_cast<std::size_t>(batch_size) - 1) /
                                static_cast<std::size_t>(batch_size));
}

RowMatrix gather_rows(const RowMatrix& src, const std::vector<std::size_t>& order, std::size_t begin,
                      std::size_t end) {
  RowMatrix out(static_cast<Eigen::Index>(end - begin), src.cols());
  for (std::size_t i = begin; i < end; ++i)
    out.row(static_cast<Eigen::Index>(i - begin)) = src.row(static_cast<Eigen::Index>(order[i]));
  return out;
}

[[noreturn]] void diverged(long long epoch, double lr) {
  throw Error(ErrorKind::Divergence, "training diverged at epoch " + std::to_string(epoch) +
                                         " (lr = " + format_double(lr) + ")");
}

void adamw_step(ModelParams& p, const TensorMap& grads, const TrainConfig& c, double lr) {
  ++p.adam_step;
  const double t = static_cast<double>(p.adam_step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (const auto& [name, g] : grads) {
    MatrixXd& theta = p.at(name);
    auto [mit, m_new] = p.adam_m.try_emplace(name, MatrixXd::Zero(g.rows(), g.cols()));
    auto [vit, v_new] = p.adam_v.try_emplace(name, MatrixXd::Zero(g.rows(), g.cols()));
    MatrixXd& m = mit->second;
    MatrixXd& v = vit->second;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    if (c.weight_decay != 0.0) theta *= 1.0 - lr * c.weight_decay;
    theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  }
}

void gd_step(ModelParams& p, const TensorMap& grads, double lr) {
  for (const auto& [name, g] : grads) p.at(name) -= lr * g;
}

double max_gram_eigenvalue(const RowMatrix& f) {
  const MatrixXd c = f.transpose() * f / static_cast<double>(f.rows());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

struct Tracker {
  TrainHistory& h;
  const TrainConfig& c;
  ModelParams best;
  bool have_best = false;

  void record(long long epoch, double mse, const ModelParams& p) {
    h.epoch_mse.push_back(mse);
    h.epoch_index.push_back(epoch);
    if (!have_best || mse < h.best_mse) {
      h.best_mse = mse;
      h.best_epoch = epoch;
      if (c.select_best) best = p;
      have_best = true;
    }
  }
};

// Plain full-batch GD on the linear model through sufficient statistics:
// grad = W C - D with C = F^T F / N, D = U^T F / N (half-sum loss).
void train_linear_gd(ModelParams& p, const Dataset& ds, const TrainConfig& c, double lr,
                     Tracker& tr) {
  const double n = static_cast<double>(ds.size());
  const MatrixXd cmat = ds.f.transpose() * ds.f / n;
  const MatrixXd dmat = ds.u.transpose() * ds.f / n;
  MatrixXd& w = p.at("W");
  const long long total = c.budget;
  for (long long step = 1; step <= total; ++step) {
    const double rate = c.auto_lr ? lr : c.lr.at(step - 1);
    w.noalias() -= rate * (w * cmat - dmat);
    if (step % c.eval_every == 0 || step == total) {
      const double mse = model_mse(p, ds.f, ds.u, ds.grid);
      if (!std::isfinite(mse)) diverged(step, rate);
      tr.record(step, mse, p);
    }
  }
  tr.h.steps = total;
}

}  // namespace

std::string optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::AdamW ? "adamw" : "gd";
}

std::optional<OptimizerKind> parse_optimizer(const std::string& name) {
  if (name == "adamw") return OptimizerKind::AdamW;
  if (name == "gd" || name == "sgd") return OptimizerKind::PlainGD;
  return std::nullopt;
}

std::string schedule_name(LrScheduleKind kind) {
  switch (kind) {
    case LrScheduleKind::Linear: return "linear";
    case LrScheduleKind::Step: return "step";
    case LrScheduleKind::Constant: return "constant";
  }
  return "unknown";
}

std::optional<LrScheduleKind> parse_schedule(const std::string& name) {
  if (name == "linear") return LrScheduleKind::Linear;
  if (name == "step") return LrScheduleKind::Step;
  if (name == "constant") return LrScheduleKind::Constant;
  return std::nullopt;
}

double LrSchedule::at(long long step) const {
  switch (kind) {
    case LrScheduleKind::Constant:
      return start;
    case LrScheduleKind::Linear: {
      if (steps <= 1) return start;
      const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(steps - 1));
      return (1.0 - t) * start + t * end;
    }
    case LrScheduleKind::Step: {
      const long long k = step_every > 0 ? step / step_every : 0;
      return std::max(end, start * std::pow(factor, static_cast<double>(k)));
    }
  }
  return start;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidSpec, what); };
  if (budget < 1) bad("training budget must be at least 1");
  if (batch_size < 0) bad("batch size must be non-negative");
  if (eval_every < 1) bad("eval_every must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("betas must lie in [0, 1)");
  if (!(eps > 0.0)) bad("eps must be positive");
  if (!(weight_decay >= 0.0)) bad("weight decay must be non-negative");
  if (lr.steps < 0) bad("lr steps must be non-negative");
  if (optimizer == OptimizerKind::PlainGD && auto_lr) return;
  if (!(lr.end > 0.0)) bad("final learning rate must be positive");
  if (!(lr.start >= lr.end)) bad("learning rate must not increase (start >= end)");
  if (lr.kind == LrScheduleKind::Step && (lr.step_every < 1 || !(lr.factor > 0.0 && lr.factor <= 1.0)))
    bad("step schedule needs step_every >= 1 and factor in (0, 1]");
}

TrainConfig default_train_config(ModelKind kind) {
  TrainConfig c;
  switch (kind) {
    case ModelKind::FdFit:
      c.budget = 1;
      break;
    case ModelKind::Linear:
      break;
    case ModelKind::DeepLinear:
      c.init = InitScheme::FanInUniform;
      break;
    case ModelKind::Mlp:
      c.init = InitScheme::FanInUniform;
      c.batch_size = 256;
      c.lr.start = 1e-2;
      c.budget = 5000;
      break;
    case ModelKind::DeepONet:
      c.init = InitScheme::FanInUniform;
      c.batch_size = 256;
      c.lr = LrSchedule{LrScheduleKind::Step, 1e-3, 1e-6, 0, 5000, 0.1};
      c.unit = BudgetUnit::Steps;
      c.budget = 20000;
      break;
  }
  return c;
}

TrainConfig theorem_mode_config(long long steps) {
  TrainConfig c;
  c.optimizer = OptimizerKind::PlainGD;
  c.lr = LrSchedule{LrScheduleKind::Constant, 1.0, 1.0, 0, 0, 1.0};
  c.auto_lr = true;
  c.batch_size = 0;
  c.unit = BudgetUnit::Steps;
  c.budget = steps;
  c.init = InitScheme::Zeros;
  c.convention = LossConvention::HalfSumPerSample;
  c.select_best = false;
  c.eval_every = static_cast<int>(std::max<long long>(1, steps / 100));
  return c;
}

KeyValue config_to_keyvalue(const TrainConfig& c) {
  KeyValue kv;
  kv.set("optimizer", optimizer_name(c.optimizer));
  kv.set("beta1", c.beta1);
  kv.set("beta2", c.beta2);
  kv.set("eps", c.eps);
  kv.set("weight_decay", c.weight_decay);
  kv.set("lr_schedule", schedule_name(c.lr.kind));
  kv.set("lr_start", c.lr.start);
  kv.set("lr_end", c.lr.end);
  kv.set("lr_steps", static_cast<std::int64_t>(c.lr.steps));
  kv.set("lr_step_every", static_cast<std::int64_t>(c.lr.step_every));
  kv.set("lr_factor", c.lr.factor);
  kv.set("auto_lr", c.auto_lr);
  kv.set("batch_size", c.batch_size);
  kv.set("budget_unit", c.unit == BudgetUnit::Epochs ? "epochs" : "steps");
  kv.set("budget", static_cast<std::int64_t>(c.budget));
  kv.set("seed", c.seed);
  kv.set("init", init_scheme_name(c.init));
  kv.set("hidden", c.shape.hidden);
  kv.set("stencil_q", c.shape.stencil_q);
  kv.set("output_bias", c.shape.output_bias);
  kv.set("loss", c.convention == LossConvention::MeanSquared ? "mse" : "half-sum");
  kv.set("select_best", c.select_best);
  kv.set("eval_every", c.eval_every);
  return kv;
}

TrainConfig config_from_keyvalue(const KeyValue& kv, TrainConfig c) {
  auto usage = [](const std::string& key, const std::string& value) {
    return Error(ErrorKind::InvalidSpec, "bad value for " + key + ": '" + value + "'");
  };
  auto boolean = [&](const std::string& key, bool& out) {
    if (auto v = kv.find(key)) {
      if (*v == "true") out = true;
      else if (*v == "false") out = false;
      else throw usage(key, *v);
    }
  };
  auto real = [&](const std::string& key, double& out) {
    if (kv.contains(key)) out = kv.get_double(key);
  };
  auto integer = [&](const std::string& key, auto& out) {
    if (kv.contains(key)) out = static_cast<std::remove_reference_t<decltype(out)>>(kv.get_int(key));
  };
  if (auto v = kv.find("optimizer")) {
    auto o = parse_optimizer(*v);
    if (!o) throw usage("optimizer", *v);
    c.optimizer = *o;
  }
  real("beta1", c.beta1);
  real("beta2", c.beta2);
  real("eps", c.eps);
  real("weight_decay", c.weight_decay);
  if (auto v = kv.find("lr_schedule")) {
    auto s = parse_schedule(*v);
    if (!s) throw usage("lr_schedule", *v);
    c.lr.kind = *s;
  }
  real("lr_start", c.lr.start);
  real("lr_end", c.lr.end);
  integer("lr_steps", c.lr.steps);
  integer("lr_step_every", c.lr.step_every);
  real("lr_factor", c.lr.factor);
  boolean("auto_lr", c.auto_lr);
  integer("batch_size", c.batch_size);
  if (auto v = kv.find("budget_unit")) {
    if (*v == "epochs") c.unit = BudgetUnit::Epochs;
    else if (*v == "steps") c.unit = BudgetUnit::Steps;
    else throw usage("budget_unit", *v);
  }
  integer("budget", c.budget);
  if (kv.contains("seed")) c.seed = kv.get_uint("seed");
  if (auto v = kv.find("init")) {
    auto s = parse_init_scheme(*v);
    if (!s) throw usage("init", *v);
    c.init = *s;
  }
  integer("hidden", c.shape.hidden);
  integer("stencil_q", c.shape.stencil_q);
  boolean("output_bias", c.shape.output_bias);
  if (auto v = kv.find("loss")) {
    if (*v == "mse") c.convention = LossConvention::MeanSquared;
    else if (*v == "half-sum") c.convention = LossConvention::HalfSumPerSample;
    else throw usage("loss", *v);
  }
  boolean("select_best", c.select_best);
  integer("eval_every", c.eval_every);
  return c;
}

std::uint64_t config_hash(const TrainConfig& config) {
  return fnv1a64(config_to_keyvalue(config).serialize());
}

TrainResult train(ModelKind kind, const Dataset& dataset, const TrainConfig& config) {
  const int m = static_cast<int>(dataset.grid.interior_size());
  return train_from(init_model(kind, m, config.seed, config.init, config.shape), dataset, config);
}

TrainResult train_from(ModelParams initial, const Dataset& ds, const TrainConfig& config) {
  config.validate();
  if (ds.size() == 0) throw Error(ErrorKind::InvalidSpec, "cannot train on an empty dataset");
  if (initial.m != ds.grid.interior_size())
    throw Error(ErrorKind::Incompatible, "model size does not match the dataset grid");
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  TrainHistory& h = result.history;
  h.seed = config.seed;
  ModelParams p = std::move(initial);
  Tracker tr{h, config, {}, false};

  if (p.kind == ModelKind::FdFit) {
    p.at("w")(0, 0) = fit_fd_parameter(ds, p.shape.stencil_q);
    const double mse = model_mse(p, ds.f, ds.u, ds.grid);
    tr.record(1, mse, p);
    h.steps = 1;
  } else {
    double auto_rate = 0.0;
    if (config.optimizer == OptimizerKind::PlainGD && config.auto_lr) {
      const double lam = max_gram_eigenvalue(ds.f);
      if (!(lam > 0.0)) throw Error(ErrorKind::DegenerateFit, "forcing data has zero energy");
      // Half-sum curvature is lambda_max; the mean-squared loss scales it by 2/M.
      auto_rate = config.convention == LossConvention::HalfSumPerSample
                      ? kAutoLrFactor / lam
                      : kAutoLrFactor * static_cast<double>(p.m) / (2.0 * lam);
      h.effective_lr = auto_rate;
    }
    const bool fast_gd = p.kind == ModelKind::Linear && config.optimizer == OptimizerKind::PlainGD &&
                         config.convention == LossConvention::HalfSumPerSample &&
                         batches_per_epoch(ds.size(), config.batch_size) == 1;
    if (fast_gd) {
      tr.record(0, model_mse(p, ds.f, ds.u, ds.grid), p);
      // Budget counts full-batch steps in either unit.
      train_linear_gd(p, ds, config, auto_rate, tr);
    } else {
      const long long per_epoch = batches_per_epoch(ds.size(), config.batch_size);
      const long long total_steps =
          config.unit == BudgetUnit::Steps ? config.budget : config.budget * per_epoch;
      LrSchedule sched = config.lr;
      if (sched.steps == 0) sched.steps = total_steps;
      const std::size_t bs = per_epoch == 1 ? ds.size() : static_cast<std::size_t>(config.batch_size);

      Rng shuffle = Rng::substream(config.seed, kShuffleStream);
      std::vector<std::size_t> order(ds.size());
      std::iota(order.begin(), order.end(), std::size_t{0});

      tr.record(0, model_mse(p, ds.f, ds.u, ds.grid), p);
      long long step = 0;
      long long epoch = 0;
      double rate = 0.0;
      while (step < total_steps) {
        ++epoch;
        if (per_epoch > 1) {
          for (std::size_t i = order.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle.next() % (i + 1));
            std::swap(order[i], order[j]);
          }
        }
        for (std::size_t b = 0; b < ds.size() && step < total_steps; b += bs) {
          const std::size_t e = std::min(ds.size(), b + bs);
          LossAndGrads lg = per_epoch == 1
                                ? loss_and_grads(p, ds.f, ds.u, ds.grid, config.convention)
                                : loss_and_grads(p, gather_rows(ds.f, order, b, e),
                                                 gather_rows(ds.u, order, b, e), ds.grid,
                                                 config.convention);
          rate = config.optimizer == OptimizerKind::PlainGD && config.auto_lr ? auto_rate
                                                                               : sched.at(step);
          if (!std::isfinite(lg.loss)) diverged(epoch, rate);
          if (config.optimizer == OptimizerKind::AdamW) adamw_step(p, lg.grads, config, rate);
          else gd_step(p, lg.grads, rate);
          ++step;
        }
        if (epoch % config.eval_every == 0 || step >= total_steps) {
          const double mse = model_mse(p, ds.f, ds.u, ds.grid);
          if (!std::isfinite(mse)) diverged(epoch, rate);
          tr.record(epoch, mse, p);
        }
      }
      h.steps = step;
    }
  }

  h.final_mse = h.epoch_mse.back();
  if (config.select_best && tr.have_best) {
    p = std::move(tr.best);
    h.final_mse = h.best_mse;
  }
  if (!p.all_finite()) diverged(h.best_epoch, h.effective_lr);
  h.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.params = std::move(p);
  return result;
}

}  // namespace genbench
