// SPDX-License-Identifier: Apache-2.0
#include "m2g2/geo_graph.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <unordered_map>
#include <unordered_set>

#include "m2g2/csv.hpp"
#include "m2g2/errors.hpp"

namespace m2g2 {
namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

std::vector<GraphNode> to_graph_nodes(std::span<const StationRecord> stations) {
  std::vector<GraphNode> out;
  out.reserve(stations.size());
  for (const auto& s : stations) out.push_back({s.station_id, s.location(), s.elevation});
  return out;
}

std::vector<GraphNode> to_graph_nodes(std::span<const CityRecord> cities) {
  std::vector<GraphNode> out;
  out.reserve(cities.size());
  for (const auto& c : cities) out.push_back({c.city_id, c.location(), c.elevation});
  return out;
}

double gaussian_edge_weight(double distance_km, double sigma_sq, double epsilon) {
  if (!(sigma_sq > 0.0)) throw InvalidParameter("gaussian_edge_weight: sigma_sq must be > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw InvalidParameter("gaussian_edge_weight: epsilon must lie in (0, 1)");
  }
  if (!(distance_km >= 0.0)) throw InvalidParameter("gaussian_edge_weight: negative distance");
  const double w = std::exp(-distance_km * distance_km / sigma_sq);
  return w >= epsilon ? w : 0.0;
}

double haversine_distance(GeoPoint a, GeoPoint b) {
  const double phi1 = radians(a.latitude);
  const double phi2 = radians(b.latitude);
  const double dphi = phi2 - phi1;
  const double dlambda = radians(b.longitude - a.longitude);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

bool elevation_screen(GeoPoint from, GeoPoint to, const ElevationProfile& profile,
                      double max_rise_m, std::size_t samples) {
  if (samples < 2) throw InvalidParameter("elevation_screen: samples must be >= 2");
  if (!(max_rise_m > 0.0)) throw InvalidParameter("elevation_screen: H must be > 0");
  const double base = profile.elevation_at(from);
  double highest = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < samples; ++k) {
    const double gamma = static_cast<double>(k) / static_cast<double>(samples - 1);
    const GeoPoint p{gamma * from.latitude + (1.0 - gamma) * to.latitude,
                     gamma * from.longitude + (1.0 - gamma) * to.longitude};
    highest = std::max(highest, profile.elevation_at(p) - base);
  }
  return highest < max_rise_m;
}

Tensor distance_matrix(std::span<const GraphNode> nodes) {
  const std::size_t n = nodes.size();
  Tensor d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = haversine_distance(nodes[i].location, nodes[j].location);
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

Tensor normalize_propagation(const Tensor& adjacency) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) {
    throw ShapeError("normalize_propagation: adjacency must be square, got " +
                     adjacency.shape_str());
  }
  Tensor a_tilde = adjacency;
  for (std::size_t i = 0; i < n; ++i) a_tilde(i, i) += 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a_tilde(i, j);
  // a / sqrt(d_i d_j) keeps regular graphs exact (d_i = d_j gives a / d).
  Tensor out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (a_tilde(i, j) != 0.0) out(i, j) = a_tilde(i, j) / std::sqrt(deg[i] * deg[j]);
    }
  return out;
}

ScaleGraph build_scale_graph(std::span<const GraphNode> nodes, const GraphParams& params,
                             const ElevationProfile& profile) {
  if (nodes.empty()) throw InvalidInput("build_scale_graph: no nodes");
  std::unordered_set<std::string> seen;
  for (const auto& n : nodes) {
    if (!seen.insert(n.id).second) {
      throw InvalidInput("build_scale_graph: duplicate node id '" + n.id + "'");
    }
  }
  const std::size_t n = nodes.size();
  ScaleGraph g;
  g.node_ids.reserve(n);
  for (const auto& node : nodes) g.node_ids.push_back(node.id);

  const Tensor dist = distance_matrix(nodes);
  g.dist_weights = Tensor(n, n);
  g.adjacency = Tensor(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      g.dist_weights(i, j) = gaussian_edge_weight(dist(i, j), params.sigma_sq, params.epsilon);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !(g.dist_weights(i, j) > 0.0)) continue;
      if (elevation_screen(nodes[i].location, nodes[j].location, profile, params.max_rise_m,
                           params.samples)) {
        g.adjacency(i, j) = 1.0;
      }
    }
  }
  g.propagation = normalize_propagation(g.adjacency);
  return g;
}

std::vector<CityRecord> city_centroids(std::span<const StationRecord> stations) {
  std::vector<CityRecord> cities;
  std::vector<std::size_t> counts;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& s : stations) {
    auto [it, inserted] = index.emplace(s.city_id, cities.size());
    if (inserted) {
      cities.push_back({s.city_id, 0.0, 0.0, 0.0});
      counts.push_back(0);
    }
    CityRecord& c = cities[it->second];
    c.latitude += s.latitude;
    c.longitude += s.longitude;
    c.elevation += s.elevation;
    ++counts[it->second];
  }
  for (std::size_t j = 0; j < cities.size(); ++j) {
    const double k = static_cast<double>(counts[j]);
    cities[j].latitude /= k;
    cities[j].longitude /= k;
    cities[j].elevation /= k;
  }
  return cities;
}

AssignmentMatrix build_assignment(std::span<const StationRecord> stations,
                                  std::span<const CityRecord> cities) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < cities.size(); ++j) {
    if (!index.emplace(cities[j].city_id, j).second) {
      throw InvalidInput("build_assignment: duplicate city id '" + cities[j].city_id + "'");
    }
  }
  AssignmentMatrix gamma;
  gamma.entries = Tensor(stations.size(), cities.size());
  gamma.members_per_city.assign(cities.size(), 0);
  gamma.city_of_station.reserve(stations.size());
  for (std::size_t i = 0; i < stations.size(); ++i) {
    auto it = index.find(stations[i].city_id);
    if (it == index.end()) {
      throw InvalidInput("build_assignment: station '" + stations[i].station_id +
                         "' references unknown city '" + stations[i].city_id + "'");
    }
    gamma.entries(i, it->second) = 1.0;
    gamma.city_of_station.push_back(it->second);
    ++gamma.members_per_city[it->second];
  }
  return gamma;
}

Tensor AssignmentMatrix::mean_operator() const {
  Tensor op(cities(), stations());
  for (std::size_t j = 0; j < cities(); ++j) {
    if (members_per_city[j] == 0) {
      throw InvalidInput("aggregate_to_city: city #" + std::to_string(j) + " has no stations");
    }
  }
  for (std::size_t i = 0; i < stations(); ++i) {
    const std::size_t j = city_of_station[i];
    op(j, i) = 1.0 / static_cast<double>(members_per_city[j]);
  }
  return op;
}

Tensor AssignmentMatrix::transpose_operator() const { return transpose(entries); }

Tensor aggregate_to_city(const Tensor& station_features, const AssignmentMatrix& gamma) {
  if (station_features.rows() != gamma.stations()) {
    throw ShapeError("aggregate_to_city: features " + station_features.shape_str() +
                     " vs assignment " + gamma.entries.shape_str());
  }
  return matmul(gamma.mean_operator(), station_features);
}

void validate_stations(std::span<const StationRecord> stations) {
  std::unordered_set<std::string> ids;
  for (const auto& s : stations) {
    if (!ids.insert(s.station_id).second) {
      throw InvalidInput("duplicate station id '" + s.station_id + "'");
    }
    if (s.city_id.empty()) throw InvalidInput("station '" + s.station_id + "' has no city_id");
    if (!(s.latitude >= -90.0 && s.latitude <= 90.0) ||
        !(s.longitude >= -180.0 && s.longitude <= 180.0)) {
      throw InvalidInput("station '" + s.station_id + "' has out-of-range coordinates");
    }
  }
}

std::vector<StationRecord> read_stations_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t c_id = t.column("station_id");
  const std::size_t c_city = t.column("city_id");
  const std::size_t c_lat = t.column("latitude");
  const std::size_t c_lon = t.column("longitude");
  const std::size_t c_elev = t.column("elevation");
  std::vector<StationRecord> out;
  out.reserve(t.rows.size());
  const std::string ctx = path.string();
  for (const auto& row : t.rows) {
    StationRecord s;
    s.station_id = row[c_id];
    s.city_id = row[c_city];
    s.latitude = csv::to_double(row[c_lat], ctx);
    s.longitude = csv::to_double(row[c_lon], ctx);
    s.elevation = csv::to_double(row[c_elev], ctx);
    out.push_back(std::move(s));
  }
  validate_stations(out);
  return out;
}

void write_stations_csv(const std::filesystem::path& path,
                        std::span<const StationRecord> stations) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "station_id,city_id,latitude,longitude,elevation\n";
  for (const auto& s : stations) {
    out << s.station_id << ',' << s.city_id << ',' << csv::format(s.latitude) << ','
        << csv::format(s.longitude) << ',' << csv::format(s.elevation) << '\n';
  }
}

}  // namespace m2g2
