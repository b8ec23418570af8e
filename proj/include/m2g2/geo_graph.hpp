// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "m2g2/elevation.hpp"
#include "m2g2/tensor.hpp"

namespace m2g2 {

constexpr double kEarthRadiusKm = 6371.0;

struct StationRecord {
  std::string station_id;
  std::string city_id;
  double latitude = 0.0;
  double longitude = 0.0;
  double elevation = 0.0;

  GeoPoint location() const { return {latitude, longitude}; }
};

/// City node placed at the mean of its member stations.
struct CityRecord {
  std::string city_id;
  double latitude = 0.0;
  double longitude = 0.0;
  double elevation = 0.0;

  GeoPoint location() const { return {latitude, longitude}; }
};

/// Vertex of a scale graph; stations and city centroids both reduce to this.
struct GraphNode {
  std::string id;
  GeoPoint location;
  double elevation = 0.0;
};

std::vector<GraphNode> to_graph_nodes(std::span<const StationRecord> stations);
std::vector<GraphNode> to_graph_nodes(std::span<const CityRecord> cities);

struct GraphParams {
  /// Kernel bandwidth (km^2). Default puts the kernel at 0.5 for 100 km.
  double sigma_sq = 100.0 * 100.0 / std::log(2.0);
  double epsilon = 0.1;
  /// Maximum terrain rise above the source node, meters.
  double max_rise_m = 500.0;
  std::size_t samples = 64;
};

/// Distance kernel, binary adjacency and renormalized propagation for one scale.
struct ScaleGraph {
  std::vector<std::string> node_ids;
  Tensor dist_weights;  ///< symmetric, zero diagonal
  Tensor adjacency;     ///< binary, possibly asymmetric
  Tensor propagation;   ///< D^-1/2 (A + I) D^-1/2

  std::size_t node_count() const noexcept { return node_ids.size(); }
};

/// Station-to-city one-hot matrix (S x C).
struct AssignmentMatrix {
  Tensor entries;
  std::vector<std::size_t> city_of_station;
  std::vector<std::size_t> members_per_city;

  std::size_t stations() const noexcept { return entries.rows(); }
  std::size_t cities() const noexcept { return entries.cols(); }
  /// diag(colsum)^-1 Gamma^T (C x S): row j averages the stations of city j.
  Tensor mean_operator() const;
  Tensor transpose_operator() const;
};

/// exp(-d^2/sigma^2) when at least `epsilon`, else 0.
double gaussian_edge_weight(double distance_km, double sigma_sq, double epsilon);

/// Great-circle distance in km (haversine, R = 6371 km).
double haversine_distance(GeoPoint a, GeoPoint b);

/// True iff the terrain between `from` and `to` never rises `max_rise_m` or
/// more above the terrain at `from`. The segment is sampled at `samples`
/// equally spaced points, endpoints included.
bool elevation_screen(GeoPoint from, GeoPoint to, const ElevationProfile& profile,
                      double max_rise_m, std::size_t samples);

Tensor distance_matrix(std::span<const GraphNode> nodes);

ScaleGraph build_scale_graph(std::span<const GraphNode> nodes, const GraphParams& params,
                             const ElevationProfile& profile);

/// D^-1/2 (A + I) D^-1/2 with D_ii the row sums of A + I.
Tensor normalize_propagation(const Tensor& adjacency);

/// One centroid per distinct city_id, in order of first appearance.
std::vector<CityRecord> city_centroids(std::span<const StationRecord> stations);

AssignmentMatrix build_assignment(std::span<const StationRecord> stations,
                                  std::span<const CityRecord> cities);

/// Per-city mean of station rows.
Tensor aggregate_to_city(const Tensor& station_features, const AssignmentMatrix& gamma);

/// Range checks and id uniqueness; throws InvalidInput.
void validate_stations(std::span<const StationRecord> stations);

/// `station_id,city_id,latitude,longitude,elevation`
std::vector<StationRecord> read_stations_csv(const std::filesystem::path& path);
void write_stations_csv(const std::filesystem::path& path,
                        std::span<const StationRecord> stations);

}  // namespace m2g2
