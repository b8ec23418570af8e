// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "m2g2/data_pipeline.hpp"
#include "m2g2/geo_graph.hpp"

namespace m2g2 {

struct Segment {
  std::size_t period = 1;  ///< steps
  double amplitude = 1.0;
  std::size_t span = 1;    ///< steps
};

struct SyntheticSpec {
  std::size_t stations = 8;
  std::size_t cities = 2;
  std::vector<Segment> segments{{16, 1.0, 100}, {48, 1.0, 160}, {6, 1.0, 90}};
  double noise_sd = 0.1;
  /// Standard deviation of each station's phase around its city's phase (radians).
  double phase_jitter = 0.3;
  /// Amplitude of an AR(1) component shared by all stations of a city.
  double city_signal = 0.0;
  double city_signal_ar = 0.95;
  std::size_t met_channels = 2;
  double met_ar = 0.9;
  double offset = 0.0;
  std::uint64_t seed = 1;
  UnixSeconds start = 1577836800;  ///< 2020-01-01T00:00:00Z
  UnixSeconds step_seconds = 3 * 3600;

  std::size_t length() const;
  /// Throws InvalidParameter for an unusable spec.
  void validate() const;
};

struct SyntheticDataset {
  FeatureSeries series;
  std::vector<StationRecord> stations;
  /// Dominant period at every step.
  std::vector<std::size_t> dominant_period;
};

/// Piecewise sinusoid per station: within segment k the pollutant channel is
/// offset + A_k sin(2 pi t / p_k + phase) + noise, plus the optional city
/// component. Meteorology channels are independent AR(1) noise.
SyntheticDataset gen_multiperiod(const SyntheticSpec& spec);

}  // namespace m2g2
