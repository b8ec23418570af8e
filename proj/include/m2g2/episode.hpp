// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "m2g2/tensor.hpp"

namespace m2g2 {

/// B episodes stacked along the node axis: every per-step matrix has B*S
/// (station) or B*C (city) rows, episode b occupying rows [b*S, (b+1)*S).
/// Values are Z-scored.
struct EpisodeBatch {
  std::size_t batch = 0;
  std::size_t stations = 0;
  std::size_t cities = 0;
  std::size_t history = 0;  ///< T
  std::size_t horizon = 0;  ///< tau
  std::size_t met = 0;      ///< M

  std::vector<Tensor> air_s;     ///< T entries: observed a^1..a^T, (B*S) x 1
  std::vector<Tensor> met_s;     ///< T+tau entries, (B*S) x M
  std::vector<Tensor> target_s;  ///< tau entries: a^{T+1}..a^{T+tau}
  std::vector<Tensor> air_c;     ///< city means of air_s, (B*C) x 1
  std::vector<Tensor> met_c;
  std::vector<Tensor> target_c;

  std::size_t steps() const noexcept { return history + horizon; }
  /// Checks every tensor against the declared sizes; throws ShapeError.
  void validate() const;
};

}  // namespace m2g2
