// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "m2g2/config.hpp"
#include "m2g2/data_pipeline.hpp"
#include "m2g2/forecaster.hpp"
#include "m2g2/metrics.hpp"
#include "m2g2/ms_gcn.hpp"
#include "m2g2/trainer.hpp"

namespace m2g2 {

/// Everything a run needs: Z-scored complete series, split, statistics and graphs.
struct PreparedData {
  std::vector<StationRecord> stations;
  std::vector<CityRecord> cities;
  ScaleGraph station_graph;
  ScaleGraph city_graph;
  MultiScaleGraph graph;
  FeatureSeries series;  ///< normalized
  NormStats stats;
  SplitSpec split;
  /// Dominant period per step; synthetic data only.
  std::vector<std::size_t> labels;
};

/// Builds both graphs from station records (flat terrain if no raster is configured).
void build_graphs(PreparedData& data, const ExperimentConfig& config);

/// Ingest, impute, resample, split and normalize the configured CSV inputs.
PreparedData prepare_dataset(const ExperimentConfig& config);
/// Generates the configured synthetic set and normalizes it.
PreparedData prepare_synthetic(const ExperimentConfig& config);
/// Split and normalize an already complete series.
PreparedData prepare_series(const ExperimentConfig& config, std::vector<StationRecord> stations,
                            FeatureSeries raw, std::vector<std::size_t> labels = {});

Forecaster make_forecaster(const ExperimentConfig& config, const PreparedData& data);
WindowSet split_windows(const ExperimentConfig& config, const PreparedData& data, SplitPart part);

/// Runs the model over `windows` and returns de-normalized station forecasts.
ForecastTable predict(const Forecaster& model, ParamStore& params, const WindowSet& windows,
                      const NormStats& stats, std::size_t batch_size);

struct RunResult {
  std::uint64_t seed = 0;
  TrainResult training;
  std::vector<SegmentMetrics> test_metrics;
};

RunResult run_seed(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed,
                   const EpochCallback& on_epoch = {});

struct SweepResult {
  MetricReport report;
  std::vector<RunResult> runs;
};

/// One training run per configured seed, scored on the test split.
SweepResult seed_sweep(const ExperimentConfig& config, const PreparedData& data,
                       const EpochCallback& on_epoch = {});

/// Test-split metrics of a stored checkpoint.
MetricReport evaluate_checkpoint(const ExperimentConfig& config, const PreparedData& data,
                                 ParamStore& params, std::uint64_t seed = 0);

/// `episode,station_id,horizon_step,predicted,actual`
std::string forecast_csv(const ForecastTable& table, const std::vector<std::string>& station_ids);

enum class Variant { full, no_city_scale, no_station_to_city, plain_gru, fixed_scale_weights };

Variant parse_variant(const std::string& name);
std::string to_string(Variant v);
/// Applies the ablation's wiring to a model configuration.
ModelConfig apply_variant(ModelConfig model, Variant v);

struct AblationResult {
  MetricReport full;
  MetricReport variant;
};

AblationResult ablate(const ExperimentConfig& config, const PreparedData& data, Variant variant);

struct GridRow {
  std::vector<std::size_t> periods;
  MetricReport report;
};

struct GridResult {
  std::vector<GridRow> rows;  ///< ranked: mean MAE ascending, ties by mean RMSE
  std::vector<std::string> warnings;
};

GridResult grid_search_periods(const ExperimentConfig& config, const PreparedData& data,
                               const std::vector<std::vector<std::size_t>>& candidates);
/// `rank,periods,<seg>_mae,<seg>_rmse...,mean_mae,mean_rmse`
std::string grid_csv(const GridResult& grid);

struct DiagnosticResult {
  std::vector<std::size_t> steps;          ///< series step of each reading
  std::vector<std::vector<double>> weights;  ///< mean station weight per part
  std::vector<std::size_t> argmax;         ///< 0-based part index
  std::vector<std::size_t> labels;         ///< dominant period at the step
  double agreement = 0.0;
};

/// Rank of each labeled period among the distinct labels, mapped onto
/// [0, parts) when the counts differ.
std::vector<std::size_t> label_ranks(const std::vector<std::size_t>& labels, std::size_t parts);

/// For every step u >= T-1 the window of the T steps ending at u is rolled
/// through the model and the station scale weights of its last step are
/// averaged over stations. Agreement is the fraction of steps whose argmax
/// part rank equals the labeled period rank.
DiagnosticResult weight_diagnostic(const Forecaster& model, ParamStore& params,
                                   const PreparedData& data, std::size_t history,
                                   std::size_t batch_size = 64);

/// Mean agreement of `trials` untrained models (seeds base_seed, base_seed+1, ...).
double random_agreement_baseline(const Forecaster& model, const PreparedData& data,
                                 std::size_t history, std::size_t trials,
                                 std::uint64_t base_seed);

std::string diagnostic_csv(const DiagnosticResult& result, const FeatureSeries& series);

/// Loads `--config` style maps and overrides into a validated configuration.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides);

}  // namespace m2g2
