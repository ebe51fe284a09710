#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "attre2vec/common.hpp"

namespace attre2vec {

// Canonical key for an undirected edge: u < v always holds.
struct EdgeKey {
  NodeId u = 0;
  NodeId v = 0;

  friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
  friend bool operator<(const EdgeKey& a, const EdgeKey& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  }
};

inline EdgeKey make_edge_key(NodeId a, NodeId b) {
  return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

inline std::uint64_t pack_edge_key(const EdgeKey& k) {
  return (static_cast<std::uint64_t>(k.u) << 32) | k.v;
}

// Undirected graph with per-node and per-edge feature vectors. Immutable
// after build_graph; safe for concurrent read access from parallel walkers.
class AttributedGraph {
 public:
  struct IncidentEdge {
    std::size_t edge = 0;  // index into edges()
    NodeId other = 0;      // opposite endpoint
  };

  std::size_t node_count() const { return node_count_; }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t node_dim() const { return node_features_.cols; }
  std::size_t edge_dim() const { return edge_features_.cols; }

  const std::vector<EdgeKey>& edges() const { return edges_; }
  const Matrix& node_feature_matrix() const { return node_features_; }
  const Matrix& edge_feature_matrix() const { return edge_features_; }

  std::span<const double> node_features(NodeId u) const {
    check_node(u);
    return node_features_.row(u);
  }

  std::span<const double> edge_features(std::size_t edge_index) const {
    if (edge_index >= edges_.size())
      throw std::out_of_range("edge index " + std::to_string(edge_index) +
                              " out of range");
    return edge_features_.row(edge_index);
  }

  bool has_edge(const EdgeKey& key) const {
    return edge_index_.count(pack_edge_key(key)) != 0;
  }

  std::size_t edge_index(const EdgeKey& key) const {
    auto it = edge_index_.find(pack_edge_key(key));
    if (it == edge_index_.end())
      throw ValidationError("unknown edge (" + std::to_string(key.u) + "," +
                            std::to_string(key.v) + ")");
    return it->second;
  }

  // All edges incident to u with the opposite endpoint, ordered by canonical
  // key.
  const std::vector<IncidentEdge>& incident_edges(NodeId u) const {
    check_node(u);
    return adjacency_[u];
  }

  std::size_t degree(NodeId u) const { return incident_edges(u).size(); }

  friend AttributedGraph build_graph(
      const std::vector<std::pair<NodeId, NodeId>>& edges, Matrix node_features,
      Matrix edge_features);

 private:
  void check_node(NodeId u) const {
    if (u >= node_count_)
      throw std::out_of_range("node id " + std::to_string(u) +
                              " out of range (node count " +
                              std::to_string(node_count_) + ")");
  }

  std::size_t node_count_ = 0;
  std::vector<EdgeKey> edges_;
  Matrix node_features_;
  Matrix edge_features_;
  std::vector<std::vector<IncidentEdge>> adjacency_;
  std::unordered_map<std::uint64_t, std::size_t> edge_index_;
};

// Validates and assembles an AttributedGraph. The node count is given by the
// node feature matrix row count (features may be zero-width, rows still
// count). Rejects self-loops, duplicate undirected edges, and dangling node
// indices, naming the offending input row.
inline AttributedGraph build_graph(
    const std::vector<std::pair<NodeId, NodeId>>& edges, Matrix node_features,
    Matrix edge_features) {
  AttributedGraph g;
  g.node_count_ = node_features.rows;
  if (edge_features.rows != edges.size())
    throw ValidationError(
        "edge feature row count " + std::to_string(edge_features.rows) +
        " does not match edge count " + std::to_string(edges.size()));

  g.edges_.reserve(edges.size());
  g.adjacency_.assign(g.node_count_, {});
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto [a, b] = edges[i];
    if (a >= g.node_count_ || b >= g.node_count_)
      throw ValidationError("edge row " + std::to_string(i) + " references node " +
                            std::to_string(std::max(a, b)) +
                            " outside node count " +
                            std::to_string(g.node_count_));
    if (a == b)
      throw ValidationError("edge row " + std::to_string(i) + " is a self-loop on node " +
                            std::to_string(a));
    const EdgeKey key = make_edge_key(a, b);
    if (!g.edge_index_.emplace(pack_edge_key(key), i).second)
      throw ValidationError("edge row " + std::to_string(i) + " duplicates edge (" +
                            std::to_string(key.u) + "," + std::to_string(key.v) +
                            ")");
    g.edges_.push_back(key);
    g.adjacency_[key.u].push_back({i, key.v});
    g.adjacency_[key.v].push_back({i, key.u});
  }

  for (auto& list : g.adjacency_) {
    std::sort(list.begin(), list.end(),
              [&](const AttributedGraph::IncidentEdge& x,
                  const AttributedGraph::IncidentEdge& y) {
                return g.edges_[x.edge] < g.edges_[y.edge];
              });
  }

  g.node_features_ = std::move(node_features);
  g.edge_features_ = std::move(edge_features);
  return g;
}

}  // namespace attre2vec
