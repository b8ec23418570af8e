// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "m2g2/episode.hpp"
#include "m2g2/geo_graph.hpp"
#include "m2g2/tensor.hpp"
#include "m2g2/timestamp.hpp"

namespace m2g2 {

/// Time x node x channel grid with a per-cell observation mask. Channel 0 is
/// the pollutant; channels 1..M are meteorology.
class FeatureSeries {
 public:
  FeatureSeries() = default;
  FeatureSeries(std::vector<std::string> node_ids, std::vector<std::string> channel_names,
                std::vector<UnixSeconds> timestamps);

  std::size_t steps() const noexcept { return timestamps_.size(); }
  std::size_t nodes() const noexcept { return node_ids_.size(); }
  std::size_t channels() const noexcept { return channel_names_.size(); }
  std::size_t met_channels() const noexcept { return channels() == 0 ? 0 : channels() - 1; }

  const std::vector<std::string>& node_ids() const noexcept { return node_ids_; }
  const std::vector<std::string>& channel_names() const noexcept { return channel_names_; }
  const std::vector<UnixSeconds>& timestamps() const noexcept { return timestamps_; }

  double value(std::size_t t, std::size_t n, std::size_t c) const { return values_[index(t, n, c)]; }
  bool observed(std::size_t t, std::size_t n, std::size_t c) const {
    return observed_[index(t, n, c)] != 0;
  }
  void set(std::size_t t, std::size_t n, std::size_t c, double v);
  void mark_missing(std::size_t t, std::size_t n, std::size_t c);

  std::size_t missing_count() const;
  /// Missing fraction over all cells of one node.
  double missing_rate(std::size_t node) const;

  friend bool operator==(const FeatureSeries&, const FeatureSeries&) = default;

 private:
  std::size_t index(std::size_t t, std::size_t n, std::size_t c) const {
    return (t * node_ids_.size() + n) * channel_names_.size() + c;
  }

  std::vector<std::string> node_ids_;
  std::vector<std::string> channel_names_;
  std::vector<UnixSeconds> timestamps_;
  std::vector<double> values_;
  std::vector<std::uint8_t> observed_;
};

/// Reads the long-format measurement file (`timestamp,station_id,pollutant,value`,
/// empty value = missing) for one pollutant and, optionally, the wide
/// meteorology file (`timestamp,station_id,<channels...>`). Timestamps are
/// placed on a uniform grid spanning the union of both files; absent cells
/// are missing. Stations follow the order of `station_ids`.
FeatureSeries load_series(const std::filesystem::path& measurements,
                          const std::filesystem::path& meteorology, const std::string& pollutant,
                          const std::vector<std::string>& station_ids);

void write_measurements_csv(const std::filesystem::path& path, const FeatureSeries& series,
                            const std::string& pollutant);
void write_meteorology_csv(const std::filesystem::path& path, const FeatureSeries& series);

struct KnnConfig {
  std::size_t k = 5;
  double w_time = 1.0;           ///< cost per step of temporal offset
  double w_space = 1.0 / 50.0;   ///< cost per km (50 km == 1 step)
  std::size_t time_window = 8;   ///< +/- steps searched at the same station
  double max_missing_rate = 0.15;
};

struct ImputeResult {
  FeatureSeries series;
  std::size_t filled = 0;
};

/// Throws DataError naming the first station whose missing rate exceeds the ceiling.
void check_missing_rates(const FeatureSeries& series, double max_rate);

/// Fills each missing cell with the mean of its K lowest-cost observed
/// neighbours: same station at |dt| <= time_window (cost w_time*|dt|) or same
/// step at another station (cost w_space*km). Ties break on (|dt|, station id).
/// Observed cells are never modified.
ImputeResult knn_impute(const FeatureSeries& series, const Tensor& distances_km,
                        const KnnConfig& config);

/// Averages non-overlapping groups of `factor` steps; trailing partial groups
/// are dropped. A cell is missing if any constituent is missing.
FeatureSeries resample_mean(const FeatureSeries& series, std::size_t factor);

/// Chronological split in step indices: [0, train_end), [train_end, val_end),
/// [val_end, total).
struct SplitSpec {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t total = 0;

  void validate() const;
};

enum class SplitPart { train, validation, test };

SplitSpec split_by_fraction(std::size_t total, double train_fraction, double val_fraction);
/// Boundaries are the first steps at or after the given timestamps.
SplitSpec split_by_timestamps(const FeatureSeries& series, UnixSeconds val_start,
                              UnixSeconds test_start);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  double normalize(std::size_t channel, double v) const {
    return (v - mean[channel]) / stddev[channel];
  }
  double denormalize(std::size_t channel, double z) const {
    return z * stddev[channel] + mean[channel];
  }
};

/// Per-channel statistics over the training steps only (population std).
/// Throws DataError for a channel with zero variance.
NormStats fit_zscore(const FeatureSeries& series, const SplitSpec& split);
FeatureSeries apply_zscore(const FeatureSeries& series, const NormStats& stats);
FeatureSeries invert_zscore(const FeatureSeries& series, const NormStats& stats);

void write_norm_stats(const std::filesystem::path& path, const NormStats& stats,
                      const std::vector<std::string>& channel_names);
NormStats read_norm_stats(const std::filesystem::path& path);

/// Start indices of windows of length T+tau inside [begin, end) at `stride`.
std::vector<std::size_t> window_episodes(std::size_t begin, std::size_t end, std::size_t history,
                                         std::size_t horizon, std::size_t stride);
std::vector<std::size_t> window_split(const SplitSpec& split, SplitPart part,
                                      std::size_t history, std::size_t horizon,
                                      std::size_t stride);

/// Stacks the windows starting at `starts` into one batch. The series must be
/// fully observed (and normally Z-scored).
EpisodeBatch make_batch(const FeatureSeries& series, const AssignmentMatrix& gamma,
                        std::span<const std::size_t> starts, std::size_t history,
                        std::size_t horizon);

}  // namespace m2g2
