// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "m2g2/autodiff.hpp"
#include "m2g2/episode.hpp"
#include "m2g2/ms_gcn.hpp"
#include "m2g2/mt_gru.hpp"
#include "m2g2/param_store.hpp"

namespace m2g2 {

enum class CityFeedback {
  /// City inputs in the forecast phase are the city head's own predictions.
  own_prediction,
  /// City inputs are the per-city mean of the station predictions.
  aggregate_stations,
};

struct ModelConfig {
  std::size_t met_channels = 0;
  std::size_t gcn_width = 32;
  std::size_t fuse_width = 32;
  std::size_t gcn_depth = 1;
  Activation gcn_activation = Activation::relu;
  std::size_t hidden = 48;
  std::vector<std::size_t> periods{1, 2, 4};
  bool bypass_scale_weights = false;
  bool use_city_scale = true;
  bool station_to_city = true;
  CityFeedback city_feedback = CityFeedback::own_prediction;
  /// Adds the warm-up one-step predictions to the loss.
  bool loss_includes_warmup = false;
  /// Value of the MT-GRU step counter at the first step of an episode.
  std::int64_t step_origin = 1;

  MsGcnConfig ms_gcn() const;
  MtGruConfig mt_gru() const;
  void validate() const;
};

/// Per-step outputs of one forward rollout.
struct ForecastOutput {
  std::vector<Var> station;  ///< tau entries, (B*S) x 1
  std::vector<Var> city;     ///< tau entries, (B*C) x 1; empty without the city scale
  std::vector<Var> warmup_station;  ///< only with loss_includes_warmup
  std::vector<Var> warmup_city;
  /// Station-scale W^P for every step (T+tau entries) when requested.
  std::vector<Var> station_scale_weights;
};

/// Two-scale sequence-to-sequence forecaster.
///
/// Step t (1-based, t = 1..T+tau) consumes [air^{t-1} | met^t] at both scales
/// and its heads estimate air^t. air^0 is the normalized mean (zero); for
/// t <= T+1 the previous air value is observed, afterwards it is the model's
/// own prediction from step t-1.
class Forecaster {
 public:
  Forecaster(ModelConfig config, MultiScaleGraph graph);

  const ModelConfig& config() const noexcept { return config_; }
  const MultiScaleGraph& graph() const noexcept { return graph_; }

  void init_params(ParamStore& store, std::uint64_t seed) const;

  ForecastOutput forward(Tape& tape, ParamStore& store, const EpisodeBatch& batch,
                         bool record_scale_weights = false) const;

  /// two_scale_mse over the forecast steps (plus warm-up steps if configured).
  Var loss(Tape& tape, const ForecastOutput& out, const EpisodeBatch& batch) const;

 private:
  ModelConfig config_;
  MultiScaleGraph graph_;
};

/// Sum of squared errors divided by (rows * steps) at each scale, rows being
/// B*S or B*C, i.e. the per-episode two-scale MSE averaged over the batch.
/// Empty prediction lists contribute 0; tau = 0 gives a constant 0.
Var two_scale_mse(Tape& tape, std::span<const Var> pred_s, std::span<const Var> pred_c,
                  std::span<const Tensor> target_s, std::span<const Tensor> target_c);

}  // namespace m2g2
