// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "m2g2/data_pipeline.hpp"
#include "m2g2/forecaster.hpp"
#include "m2g2/geo_graph.hpp"
#include "m2g2/optimizer.hpp"
#include "m2g2/synthetic.hpp"

namespace m2g2 {

struct DataConfig {
  std::string stations_csv;
  std::string measurements_csv;
  std::string meteorology_csv;
  std::string elevation_raster;  ///< empty: flat terrain
  std::string pollutant = "PM2.5";
  /// Raw steps averaged into one model step (hourly data -> 3 h steps).
  std::size_t resample_factor = 3;
};

struct SplitConfig {
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  /// ISO-8601 boundaries; when both are set they replace the fractions.
  std::string val_start;
  std::string test_start;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::size_t patience = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t train_stride = 1;
  /// 0 selects the horizon length.
  std::size_t eval_stride = 0;

  void validate() const;
};

struct ExperimentConfig {
  DataConfig data;
  GraphParams graph;
  GraphParams city_graph;
  KnnConfig knn;
  SplitConfig split;
  ModelConfig model;
  std::size_t history = 24;
  std::size_t horizon = 24;
  TrainConfig train;
  std::size_t metric_segments = 3;
  SyntheticSpec synth;
  std::size_t diagnostic_trials = 20;

  std::size_t eval_stride() const noexcept {
    return train.eval_stride == 0 ? horizon : train.eval_stride;
  }
  /// Throws ConfigError / InvalidParameter on inconsistent values.
  void validate() const;
};

/// One documented key of the flat configuration format.
struct ConfigKey {
  std::string name;
  std::string description;
};

const std::vector<ConfigKey>& config_keys();

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& context);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Applies every entry of `values` to `config`; throws ConfigError naming the
/// offending key on an unknown key or malformed value.
void apply_config(ExperimentConfig& config, const std::map<std::string, std::string>& values);
/// Splits `key=value`; throws ConfigError when there is no `=`.
std::pair<std::string, std::string> parse_override(const std::string& text);

std::string config_value(const ExperimentConfig& config, const std::string& key);
/// Every documented key with its current value, one per line.
std::string dump_config(const ExperimentConfig& config);

std::vector<std::size_t> parse_size_list(const std::string& text);
std::string format_size_list(const std::vector<std::size_t>& values);

}  // namespace m2g2
