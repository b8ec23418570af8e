// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "m2g2/autodiff.hpp"
#include "m2g2/geo_graph.hpp"
#include "m2g2/param_store.hpp"

namespace m2g2 {

/// Constant operators consumed by the two-scale convolution.
struct MultiScaleGraph {
  Tensor station_propagation;  ///< S x S
  Tensor city_propagation;     ///< C x C
  AssignmentMatrix gamma;      ///< S x C one-hot rows
  Tensor gamma_transpose;      ///< C x S, sums member stations
  Tensor city_mean;            ///< C x S, averages member stations

  static MultiScaleGraph from(const ScaleGraph& stations, const ScaleGraph& cities,
                              AssignmentMatrix gamma);
  std::size_t stations() const noexcept { return gamma.stations(); }
  std::size_t cities() const noexcept { return gamma.cities(); }
};

struct MsGcnConfig {
  std::size_t met_channels = 0;
  std::size_t gcn_width = 32;
  std::size_t fuse_width = 32;
  std::size_t depth = 1;
  Activation activation = Activation::relu;
  /// false: station-only model; city convolution and fusion are removed and
  /// the station fusion transform reads the station's own GCN features.
  bool use_city_scale = true;
  /// false: the city side fuses its own GCN features instead of the
  /// transferred station features.
  bool station_to_city = true;

  std::size_t input_width() const noexcept { return met_channels + 1; }
  std::size_t output_width() const noexcept { return fuse_width + met_channels + 1; }
  void validate() const;
};

/// Parameter names: ms_gcn.W_s_gcn.<k>, ms_gcn.W_c_gcn.<k>, ms_gcn.W_s_f, ms_gcn.W_c_f.
void register_ms_gcn_params(ParamStore& store, const MsGcnConfig& config, std::uint64_t seed);

struct MsGcnWeights {
  std::vector<Var> station_gcn;
  std::vector<Var> city_gcn;
  Var station_fuse;
  Var city_fuse;

  static MsGcnWeights bind(Tape& tape, ParamStore& store, const MsGcnConfig& config);
};

/// activation(S * X * W). X may stack several graphs' worth of rows.
Var gcn_forward(Var x, const Tensor& propagation, Var weight, Activation activation);

struct FusedFeatures {
  Var station;  ///< S x (fuse_width + M + 1) per block
  Var city;     ///< C x (fuse_width + M + 1) per block; unbound without the city scale
};

/// [X_s | Gamma * Xc_gcn * W_sF] and [X_c | Gamma^T * Xs_gcn * W_cF].
FusedFeatures bidirectional_fuse(Var station_in, Var city_in, Var station_gcn, Var city_gcn,
                                 const MultiScaleGraph& graph, Var station_fuse,
                                 Var city_fuse);

/// Two-scale convolution followed by the bidirectional fusion.
FusedFeatures ms_gcn_step(Var station_in, Var city_in, const MultiScaleGraph& graph,
                          const MsGcnWeights& weights, const MsGcnConfig& config);

}  // namespace m2g2
