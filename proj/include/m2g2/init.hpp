// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

#include "m2g2/tensor.hpp"

namespace m2g2 {

enum class InitScheme {
  /// uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)); fan_in = rows, fan_out = cols.
  glorot_uniform,
  zeros,
};

/// Deterministic initialization. `stream` separates parameters that share a
/// run seed so that each gets an independent draw.
Tensor seeded_init(std::size_t rows, std::size_t cols, std::uint64_t seed,
                   InitScheme scheme = InitScheme::glorot_uniform, std::uint64_t stream = 0);

/// Stable 64-bit hash for deriving per-parameter streams from names.
std::uint64_t stream_id(std::string_view name);

}  // namespace m2g2
