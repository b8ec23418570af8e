// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "m2g2/autodiff.hpp"
#include "m2g2/param_store.hpp"

namespace m2g2 {

/// Multi-period GRU cell configuration.
///
/// The hidden state (N x hidden) is split column-wise into periods.size()
/// equal parts; part v is rewritten only at steps t with t % periods[v] == 0
/// and otherwise carries its weighted previous value forward.
struct MtGruConfig {
  std::size_t input_width = 0;
  std::size_t hidden = 48;
  std::vector<std::size_t> periods{1, 2, 4};
  /// Pins the dynamic scale weights to 1 (plain GRU update on H_prev).
  bool bypass_scale_weights = false;

  std::size_t parts() const noexcept { return periods.size(); }
  std::size_t part_width() const noexcept { return hidden / periods.size(); }
  /// Throws ConfigError on empty/non-increasing periods or hidden % parts != 0.
  void validate() const;
};

/// Names under `prefix`: W_xp W_hp b_p (unless bypassed), W_xr W_xz W_xh,
/// W_hr W_hz W_hh, b_r b_z b_h. Biases start at zero.
void register_mt_gru_params(ParamStore& store, const std::string& prefix,
                            const MtGruConfig& config, std::uint64_t seed);

struct MtGruWeights {
  Var w_xp, w_hp, b_p;
  Var w_xr, w_xz, w_xh;
  Var w_hr, w_hz, w_hh;
  Var b_r, b_z, b_h;

  static MtGruWeights bind(Tape& tape, ParamStore& store, const std::string& prefix,
                           const MtGruConfig& config);
};

/// sigmoid(X W_xp + H W_hp + b_p): one weight per node and part.
Var dynamic_scale_weights(Var x, Var h_prev, const MtGruWeights& weights);

/// Scales part v of every row of `h_prev` by column v of `scale_weights`.
Var apply_scale_weights(Var h_prev, Var scale_weights);

/// 0-based indices v with t % periods[v] == 0.
std::vector<std::size_t> eligible_parts(std::int64_t t, std::span<const std::size_t> periods);

struct MtGruStep {
  Var hidden;         ///< H^t
  Var weighted_prev;  ///< H'^{t-1}
  Var scale_weights;  ///< W^P; unbound when bypassed
};

MtGruStep mt_gru_step(Var x, Var h_prev, std::int64_t t, const MtGruConfig& config,
                      const MtGruWeights& weights);

}  // namespace m2g2
