#include "stgan/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "stgan/csv.hpp"
#include "stgan/errors.hpp"

namespace stgan {

namespace {
constexpr double kEarthRadius = 6371000.0;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

void validate_station(const Station& s) {
  if (!(s.latitude >= -90.0 && s.latitude <= 90.0) || !(s.longitude >= -180.0 && s.longitude <= 180.0)) {
    throw GraphError("station '" + s.id + "' has coordinates out of range");
  }
}
}  // namespace

double station_distance(const Station& a, const Station& b) {
  const double phi1 = radians(a.latitude);
  const double phi2 = radians(b.latitude);
  const double dphi = phi2 - phi1;
  const double dlambda = radians(b.longitude - a.longitude);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(h)));
}

Tensor propagation_matrix(const Tensor& weights) {
  if (weights.rank() != 2 || weights.dim(0) != weights.dim(1)) {
    throw DimensionError("propagation_matrix: expected square matrix, got " + shape_string(weights.shape()));
  }
  const std::size_t n = weights.dim(0);
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;  // self loop
    for (std::size_t j = 0; j < n; ++j) deg += weights.at(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = weights.at(i, j) + (i == j ? 1.0 : 0.0);
      out.at(i, j) = inv_sqrt_deg[i] * a * inv_sqrt_deg[j];
    }
  }
  return out;
}

Tensor graph_convolve(const Tensor& propagation, const Tensor& x, const Tensor& theta) {
  return matmul(matmul(propagation, x), theta);
}

TrafficGraph TrafficGraph::build(std::vector<Station> stations, double threshold, const EdgeList& forced_edges) {
  const std::size_t n = stations.size();
  if (n < 2) throw GraphError("a traffic graph needs at least 2 stations, got " + std::to_string(n));
  if (!(threshold > 0.0)) throw GraphError("adjacency threshold must be positive");
  std::set<std::string> ids;
  for (const auto& s : stations) {
    validate_station(s);
    if (!ids.insert(s.id).second) throw GraphError("duplicate station id '" + s.id + "'");
  }

  TrafficGraph g;
  g.stations_ = std::move(stations);
  g.threshold_ = threshold;
  g.forced_edges_ = forced_edges;
  g.distances_ = Tensor({n, n});

  // Population standard deviation over the n(n-1)/2 unordered pairs.
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = station_distance(g.stations_[i], g.stations_[j]);
      g.distances_.at(i, j) = d;
      g.distances_.at(j, i) = d;
      sum += d;
    }
  }
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  const double mean = sum / pairs;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dev = g.distances_.at(i, j) - mean;
      ss += dev * dev;
    }
  }
  g.sigma_ = std::sqrt(ss / pairs);
  if (!(g.sigma_ > 0.0)) {
    // Equal pairwise distances (always the case for two stations) have zero
    // spread; the common distance is then the only available length scale.
    if (!(mean > 0.0)) throw GraphError("degenerate geometry: all stations are coincident (sigma = 0)");
    g.sigma_ = mean;
  }

  g.adjacency_.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = g.distances_.at(i, j);
      if (i != j && d > 0.0 && d <= threshold) g.adjacency_[i * n + j] = 1;
    }
  }
  for (const auto& [a, b] : forced_edges) {
    const std::size_t i = g.index_of(a);
    const std::size_t j = g.index_of(b);
    if (i == j) throw GraphError("edge override '" + a + "," + b + "' is a self loop");
    g.adjacency_[i * n + j] = 1;
    g.adjacency_[j * n + i] = 1;
  }

  g.weights_ = Tensor({n, n});
  const double s2 = g.sigma_ * g.sigma_;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (g.adjacency_[i * n + j]) {
        const double d = g.distances_.at(i, j);
        g.weights_.at(i, j) = std::exp(-(d * d) / s2);
      }
    }
  }
  g.propagation_ = propagation_matrix(g.weights_);
  return g;
}

std::vector<std::string> TrafficGraph::station_ids() const {
  std::vector<std::string> ids;
  ids.reserve(stations_.size());
  for (const auto& s : stations_) ids.push_back(s.id);
  return ids;
}

std::size_t TrafficGraph::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < stations_.size(); ++i) {
    if (stations_[i].id == id) return i;
  }
  throw GraphError("unknown station id '" + id + "'");
}

bool TrafficGraph::contains(const std::string& id) const {
  return std::any_of(stations_.begin(), stations_.end(), [&](const Station& s) { return s.id == id; });
}

NodeSubgraph node_subgraph(const TrafficGraph& graph, std::size_t v) {
  if (v >= graph.size()) {
    throw GraphError("node index " + std::to_string(v) + " out of range for " + std::to_string(graph.size()) + " nodes");
  }
  NodeSubgraph sg{v, {}};
  for (std::size_t u = 0; u < graph.size(); ++u) {
    if (u == v || graph.adjacent(u, v)) sg.members.push_back(u);
  }
  return sg;
}

std::vector<Station> read_stations_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto c_id = t.column("camera_id");
  const auto c_lat = t.column("lat");
  const auto c_lon = t.column("lon");
  std::vector<Station> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    out.push_back(Station{r[c_id], parse_double(r[c_lat], "lat"), parse_double(r[c_lon], "lon")});
  }
  return out;
}

void write_stations_csv(const std::filesystem::path& path, const std::vector<Station>& stations) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "camera_id,lat,lon\n";
  for (const auto& s : stations) out << s.id << ',' << format_double(s.latitude) << ',' << format_double(s.longitude) << '\n';
}

EdgeList read_edges_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto ca = t.column("id_a");
  const auto cb = t.column("id_b");
  EdgeList edges;
  for (const auto& r : t.rows) edges.emplace_back(r[ca], r[cb]);
  return edges;
}

}  // namespace stgan
