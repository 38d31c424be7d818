#pragma once

#include <filesystem>

#include "genbench/keyvalue.hpp"
#include "genbench/models.hpp"
#include "genbench/training.hpp"

namespace genbench {

struct Checkpoint {
  ModelParams params;
  int n_grid = 0;
  KeyValue config;
  /// Train-set MSE of the stored parameters, when known.
  double train_mse = 0.0;
};

/// `<dir>/manifest` (kind, shapes, seed, config hash, resolved config) and
/// one `<dir>/<tensor>.bin` per named tensor. `dir` must already exist.
void write_checkpoint(const std::filesystem::path& dir, const ModelParams& params, int n_grid,
                      const TrainConfig& config, double train_mse);

Checkpoint read_checkpoint(const std::filesystem::path& dir);

}  // namespace genbench
