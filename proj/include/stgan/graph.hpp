#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "stgan/tensor.hpp"

namespace stgan {

struct Station {
  std::string id;
  double latitude = 0.0;   // degrees
  double longitude = 0.0;  // degrees
};

inline constexpr double kDefaultAdjacencyThreshold = 2000.0;  // meters

/// Great-circle (haversine) distance in meters.
double station_distance(const Station& a, const Station& b);

/// D^-1/2 (W + I) D^-1/2 with D the degree matrix of W + I.
Tensor propagation_matrix(const Tensor& weights);

/// Single-hop graph convolution: propagation * x * theta.
Tensor graph_convolve(const Tensor& propagation, const Tensor& x, const Tensor& theta);

using EdgeList = std::vector<std::pair<std::string, std::string>>;

/// Weighted camera graph.
///
/// Stations i != j are adjacent when 0 < dist <= threshold, or when the pair
/// appears in the optional override list. Adjacent pairs carry the Gaussian
/// kernel weight exp(-dist^2 / sigma^2), where sigma is the population
/// standard deviation over all unordered pairwise distances. The station
/// order given at construction is the node order everywhere downstream.
class TrafficGraph {
 public:
  static TrafficGraph build(std::vector<Station> stations, double threshold,
                            const EdgeList& forced_edges = {});

  std::size_t size() const { return stations_.size(); }
  const std::vector<Station>& stations() const { return stations_; }
  std::vector<std::string> station_ids() const;
  std::size_t index_of(const std::string& id) const;  // GraphError if absent
  bool contains(const std::string& id) const;

  const Tensor& weights() const { return weights_; }
  const Tensor& propagation() const { return propagation_; }
  const Tensor& distances() const { return distances_; }
  double sigma() const { return sigma_; }
  double threshold() const { return threshold_; }
  bool adjacent(std::size_t i, std::size_t j) const { return i != j && adjacency_[i * size() + j]; }
  const EdgeList& forced_edges() const { return forced_edges_; }

 private:
  std::vector<Station> stations_;
  Tensor distances_;
  Tensor weights_;
  Tensor propagation_;
  std::vector<char> adjacency_;
  EdgeList forced_edges_;
  double sigma_ = 0.0;
  double threshold_ = 0.0;
};

struct NodeSubgraph {
  std::size_t center = 0;
  std::vector<std::size_t> members;  // sorted, includes center
};

NodeSubgraph node_subgraph(const TrafficGraph& graph, std::size_t v);

// Stations CSV: camera_id,lat,lon
std::vector<Station> read_stations_csv(const std::filesystem::path& path);
void write_stations_csv(const std::filesystem::path& path, const std::vector<Station>& stations);
// Edge override CSV: id_a,id_b
EdgeList read_edges_csv(const std::filesystem::path& path);

}  // namespace stgan
