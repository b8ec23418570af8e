// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <string>
#include <vector>

#include "convert.hpp"
#include "m2g2/geo_graph.hpp"
#include "m2g2/ms_gcn.hpp"
#include "oracles.hpp"

namespace testing_support {

inline m2g2::ScaleGraph graph_from(const oracle::Mat& adj) {
  m2g2::ScaleGraph g;
  for (std::size_t i = 0; i < adj.size(); ++i) g.node_ids.push_back("n" + std::to_string(i));
  g.adjacency = to_tensor(adj);
  g.dist_weights = m2g2::Tensor(adj.size(), adj.size());
  g.propagation = m2g2::normalize_propagation(g.adjacency);
  return g;
}

inline m2g2::AssignmentMatrix assignment_from(const std::vector<std::size_t>& city_of,
                                              std::size_t cities) {
  std::vector<m2g2::StationRecord> stations;
  for (std::size_t i = 0; i < city_of.size(); ++i) {
    stations.push_back({"s" + std::to_string(i), "c" + std::to_string(city_of[i]),
                        10.0 + 0.1 * static_cast<double>(i), 20.0, 0.0});
  }
  std::vector<m2g2::CityRecord> city_list;
  for (std::size_t j = 0; j < cities; ++j) city_list.push_back({"c" + std::to_string(j), 0, 0, 0});
  return m2g2::build_assignment(stations, city_list);
}

inline oracle::Mat random_adjacency(std::size_t n, std::mt19937_64& rng, double p = 0.4) {
  std::bernoulli_distribution edge(p);
  oracle::Mat a = oracle::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (edge(rng)) a[i][j] = a[j][i] = 1.0;
  return a;
}

inline m2g2::MultiScaleGraph multi_graph(const oracle::Mat& adj_s, const oracle::Mat& adj_c,
                                         const std::vector<std::size_t>& city_of) {
  return m2g2::MultiScaleGraph::from(graph_from(adj_s), graph_from(adj_c),
                                     assignment_from(city_of, adj_c.size()));
}

}  // namespace testing_support
