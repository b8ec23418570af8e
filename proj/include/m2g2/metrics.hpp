// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace m2g2 {

/// Horizon steps [begin, end), 0-based.
struct HorizonSegment {
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const HorizonSegment&, const HorizonSegment&) = default;
};

/// `count` contiguous segments covering [0, horizon); earlier segments take
/// the remainder when the split is uneven.
std::vector<HorizonSegment> horizon_segments(std::size_t horizon, std::size_t count);

struct SegmentMetrics {
  double mae = 0.0;
  double rmse = 0.0;

  friend bool operator==(const SegmentMetrics&, const SegmentMetrics&) = default;
};

/// Predictions and observations in physical units, laid out as
/// values[(episode * horizon + step) * stations + station].
struct ForecastTable {
  std::size_t episodes = 0;
  std::size_t horizon = 0;
  std::size_t stations = 0;
  std::vector<double> predicted;
  std::vector<double> actual;

  std::size_t index(std::size_t e, std::size_t k, std::size_t s) const noexcept {
    return (e * horizon + k) * stations + s;
  }
  /// Throws ShapeError when the vectors disagree with the declared sizes.
  void validate() const;
};

/// MAE and RMSE over every episode, station and step inside each segment.
std::vector<SegmentMetrics> segment_metrics(const ForecastTable& table,
                                            const std::vector<HorizonSegment>& segments);

struct MetricReport {
  std::vector<HorizonSegment> segments;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<SegmentMetrics>> per_seed;  ///< [seed][segment]

  void add_run(std::uint64_t seed, std::vector<SegmentMetrics> metrics);
  /// Arithmetic mean over seeds, per segment.
  std::vector<SegmentMetrics> mean() const;
  /// Sample standard deviation over seeds (0 for a single seed).
  std::vector<SegmentMetrics> stddev() const;
  /// Mean MAE / RMSE over segments of the seed-mean.
  double overall_mae() const;
  double overall_rmse() const;
  /// Throws ContractError if any RMSE is below its MAE or a value is negative.
  void check_invariants() const;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// `label,seed,segment,first_step,last_step,mae,rmse` rows, with `mean` and
/// `std` pseudo-seeds appended.
std::string report_csv(const MetricReport& report, const std::string& label,
                       bool include_header = true);
/// Aligned table, one line per segment: `steps a-b  MAE m +- s  RMSE r +- s`.
std::string report_text(const MetricReport& report, const std::string& title);

}  // namespace m2g2
