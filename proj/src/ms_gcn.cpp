// SPDX-License-Identifier: Apache-2.0
#include "m2g2/ms_gcn.hpp"

#include "m2g2/errors.hpp"
#include "m2g2/init.hpp"

namespace m2g2 {
namespace {

std::string layer_name(const char* base, std::size_t k) {
  return std::string(base) + "." + std::to_string(k);
}

void add_param(ParamStore& store, const std::string& name, std::size_t rows, std::size_t cols,
               std::uint64_t seed) {
  store.add(name, seeded_init(rows, cols, seed, InitScheme::glorot_uniform, stream_id(name)));
}

}  // namespace

MultiScaleGraph MultiScaleGraph::from(const ScaleGraph& stations, const ScaleGraph& cities,
                                      AssignmentMatrix gamma) {
  if (gamma.stations() != stations.node_count() || gamma.cities() != cities.node_count()) {
    throw ShapeError("MultiScaleGraph: assignment " + gamma.entries.shape_str() +
                     " does not match graphs with " + std::to_string(stations.node_count()) +
                     " stations and " + std::to_string(cities.node_count()) + " cities");
  }
  MultiScaleGraph g;
  g.station_propagation = stations.propagation;
  g.city_propagation = cities.propagation;
  g.gamma_transpose = gamma.transpose_operator();
  g.city_mean = gamma.mean_operator();
  g.gamma = std::move(gamma);
  return g;
}

void MsGcnConfig::validate() const {
  if (gcn_width == 0 || fuse_width == 0) throw ConfigError("ms_gcn: channel widths must be > 0");
  if (depth == 0) throw ConfigError("ms_gcn: depth must be >= 1");
}

void register_ms_gcn_params(ParamStore& store, const MsGcnConfig& config, std::uint64_t seed) {
  config.validate();
  for (std::size_t k = 0; k < config.depth; ++k) {
    const std::size_t in = k == 0 ? config.input_width() : config.gcn_width;
    add_param(store, layer_name("ms_gcn.W_s_gcn", k), in, config.gcn_width, seed);
    if (config.use_city_scale) {
      add_param(store, layer_name("ms_gcn.W_c_gcn", k), in, config.gcn_width, seed);
    }
  }
  add_param(store, "ms_gcn.W_s_f", config.gcn_width, config.fuse_width, seed);
  if (config.use_city_scale) {
    add_param(store, "ms_gcn.W_c_f", config.gcn_width, config.fuse_width, seed);
  }
}

MsGcnWeights MsGcnWeights::bind(Tape& tape, ParamStore& store, const MsGcnConfig& config) {
  MsGcnWeights w;
  for (std::size_t k = 0; k < config.depth; ++k) {
    w.station_gcn.push_back(tape.param(store, layer_name("ms_gcn.W_s_gcn", k)));
    if (config.use_city_scale) {
      w.city_gcn.push_back(tape.param(store, layer_name("ms_gcn.W_c_gcn", k)));
    }
  }
  w.station_fuse = tape.param(store, "ms_gcn.W_s_f");
  if (config.use_city_scale) w.city_fuse = tape.param(store, "ms_gcn.W_c_f");
  return w;
}

Var gcn_forward(Var x, const Tensor& propagation, Var weight, Activation activation) {
  if (x.cols() != weight.rows()) {
    throw ShapeError("gcn_forward: features " + x.value().shape_str() + " vs kernel " +
                     weight.value().shape_str());
  }
  return activate(block_left_mul(propagation, matmul(x, weight)), activation);
}

FusedFeatures bidirectional_fuse(Var station_in, Var city_in, Var station_gcn, Var city_gcn,
                                 const MultiScaleGraph& graph, Var station_fuse,
                                 Var city_fuse) {
  Var to_station = block_left_mul(graph.gamma.entries, matmul(city_gcn, station_fuse));
  Var to_city = block_left_mul(graph.gamma_transpose, matmul(station_gcn, city_fuse));
  return {concat_cols({station_in, to_station}), concat_cols({city_in, to_city})};
}

FusedFeatures ms_gcn_step(Var station_in, Var city_in, const MultiScaleGraph& graph,
                          const MsGcnWeights& weights, const MsGcnConfig& config) {
  Var xs = station_in;
  for (Var w : weights.station_gcn) {
    xs = gcn_forward(xs, graph.station_propagation, w, config.activation);
  }
  if (!config.use_city_scale) {
    return {concat_cols({station_in, matmul(xs, weights.station_fuse)}), Var()};
  }
  Var xc = city_in;
  for (Var w : weights.city_gcn) {
    xc = gcn_forward(xc, graph.city_propagation, w, config.activation);
  }
  if (config.station_to_city) {
    return bidirectional_fuse(station_in, city_in, xs, xc, graph, weights.station_fuse,
                              weights.city_fuse);
  }
  Var to_station = block_left_mul(graph.gamma.entries, matmul(xc, weights.station_fuse));
  return {concat_cols({station_in, to_station}),
          concat_cols({city_in, matmul(xc, weights.city_fuse)})};
}

}  // namespace m2g2
