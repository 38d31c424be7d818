#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "genbench/datasets.hpp"
#include "genbench/keyvalue.hpp"
#include "genbench/models.hpp"

namespace genbench {

enum class OptimizerKind { AdamW, PlainGD };
enum class LrScheduleKind { Linear, Step, Constant };

std::string optimizer_name(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer(const std::string& name);
std::string schedule_name(LrScheduleKind kind);
std::optional<LrScheduleKind> parse_schedule(const std::string& name);

/// Linear: start -> end over `steps` optimizer steps.
/// Step: start * factor^(step / step_every), floored at end.
struct LrSchedule {
  LrScheduleKind kind = LrScheduleKind::Linear;
  double start = 1e-1;
  double end = 1e-6;
  long long steps = 1;
  long long step_every = 5000;
  double factor = 0.1;

  double at(long long step) const;
};

enum class BudgetUnit { Epochs, Steps };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::AdamW;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  LrSchedule lr;
  /// 0 means full batch.
  int batch_size = 0;
  BudgetUnit unit = BudgetUnit::Epochs;
  long long budget = 2000;
  std::uint64_t seed = 0;
  InitScheme init = InitScheme::Zeros;
  ModelShape shape;
  LossConvention convention = LossConvention::MeanSquared;
  bool select_best = true;
  /// Full train-set evaluations happen every `eval_every` epochs (and at the end).
  int eval_every = 1;
  /// PlainGD only: step size 1.8 / lambda_max of the loss Hessian, ignoring `lr`.
  bool auto_lr = false;

  /// Throws Error(InvalidSpec) on inconsistent values.
  void validate() const;
};

/// Table defaults for each kind.
TrainConfig default_train_config(ModelKind kind);

/// Plain full-batch GD from W0 without decay or momentum, half-sum loss,
/// step size 1.8 / lambda_max, no best-epoch selection.
TrainConfig theorem_mode_config(long long steps);

KeyValue config_to_keyvalue(const TrainConfig& config);
/// Missing keys keep the values already in `base`.
TrainConfig config_from_keyvalue(const KeyValue& kv, TrainConfig base);
std::uint64_t config_hash(const TrainConfig& config);

struct TrainHistory {
  /// Train-set MSE at each evaluation point, with the epoch it was taken at.
  std::vector<double> epoch_mse;
  std::vector<long long> epoch_index;
  double final_mse = 0.0;
  double best_mse = 0.0;
  long long best_epoch = 0;
  long long steps = 0;
  double effective_lr = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

/// Trains from init_model(kind, M, seed, config.init, config.shape). FdFit is
/// fitted in closed form. Throws Error(Divergence) when the loss stops being finite.
TrainResult train(ModelKind kind, const Dataset& dataset, const TrainConfig& config);

/// Same, starting from the given parameters.
TrainResult train_from(ModelParams initial, const Dataset& dataset, const TrainConfig& config);

}  // namespace genbench
