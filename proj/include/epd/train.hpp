#pragma once

#include <cstdint>
#include <vector>

#include "epd/net.hpp"
#include "epd/scene.hpp"

namespace epd::train {

struct TrainConfig {
  double lr = 5e-4;
  int epochs = 64;
  int warmup_epochs = 10;
  int batch_size = 32;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Linear warmup from 0 over warmup_epochs, then cosine decay to 0 at epochs.
// epoch_frac is a continuous epoch coordinate in [0, epochs]; batches sample
// the schedule at their midpoint.
double lr_at(const TrainConfig& cfg, double epoch_frac);

struct EpochLog {
  int epoch{0};
  double mean_loss{0.0};  // mean per-scene loss over the epoch
  double lr{0.0};         // learning rate of the final batch
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int scenes_used{0};
  int scenes_skipped{0};
};

// Fits params.standardizer on the corpus targets, then minimizes the
// noise-prediction MSE with AdamW (decoupled decay on weight matrices only).
// Scenes with missing futures or no agents are skipped with a warning on
// stderr. Deterministic in (cfg.seed, corpus order); per-scene gradient work
// runs in parallel with an order-fixed reduction. Throws ModelError when the
// loss stops being finite.
TrainResult train(net::ModelParams& params, const std::vector<scene::Scene>& scenes,
                  const TrainConfig& cfg);

// Column-wise mean / population std of the rows, std clamped to >= 1e-6.
net::Standardizer fit_standardizer(const net::Mat& rows);

}  // namespace epd::train
