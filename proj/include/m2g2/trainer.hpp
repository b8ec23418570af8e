// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "m2g2/config.hpp"
#include "m2g2/data_pipeline.hpp"
#include "m2g2/forecaster.hpp"
#include "m2g2/param_store.hpp"

namespace m2g2 {

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  ParamStore best;  ///< parameters at the lowest validation loss
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  /// Last epoch that ran; smaller than the epoch budget on early stop.
  std::size_t stopped_epoch = 0;
};

/// Episodes of one split, ready to batch.
struct WindowSet {
  const FeatureSeries* series = nullptr;
  const AssignmentMatrix* gamma = nullptr;
  std::vector<std::size_t> starts;
  std::size_t history = 0;
  std::size_t horizon = 0;

  EpisodeBatch batch(std::span<const std::size_t> subset) const;
};

/// Mean over episodes of the model loss, evaluated without gradients in
/// chronological batches of `batch_size`.
double mean_loss(const Forecaster& model, ParamStore& params, const WindowSet& windows,
                 std::size_t batch_size);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on the two-scale loss with per-epoch shuffling seeded by `seed` and
/// early stopping on the validation loss. `params` must already be
/// initialized. Throws NonFiniteError when the loss or a gradient diverges.
TrainResult train(const Forecaster& model, ParamStore params, const WindowSet& train_windows,
                  const WindowSet& val_windows, const TrainConfig& config, std::uint64_t seed,
                  const EpochCallback& on_epoch = {});

/// `epoch,train_loss,val_loss`
std::string training_log_csv(const std::vector<EpochRecord>& log);
void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log);

}  // namespace m2g2
