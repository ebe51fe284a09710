#pragma once

#include <cstdint>
#include <vector>

#include "attre2vec/common.hpp"
#include "attre2vec/graph.hpp"

namespace attre2vec {

struct WalkConfig {
  std::uint32_t walks_per_endpoint = 16;  // k
  std::uint32_t walk_length = 8;          // L, in edges
  std::uint64_t seed = 0;

  void validate() const {
    if (walks_per_endpoint < 1)
      throw ConfigError("walks_per_endpoint must be >= 1");
    if (walk_length < 1) throw ConfigError("walk_length must be >= 1");
  }
};

struct WalkStep {
  std::size_t edge = 0;  // index into graph.edges()
  NodeId node = 0;       // endpoint arrived at
};

// A sequence of at most L edge-connected steps from one start node. Shorter
// than L only at dead ends; empty only for an isolated start node.
struct Walk {
  NodeId start = 0;
  std::vector<WalkStep> steps;

  bool empty() const { return steps.empty(); }
  std::size_t length() const { return steps.size(); }
};

// Uniform edge random walk: at each step the next edge is chosen uniformly
// among all edges incident to the current node (backtracking allowed).
inline Walk edge_random_walk(const AttributedGraph& graph, NodeId start,
                             std::uint32_t length, Rng& rng) {
  Walk walk;
  walk.start = start;
  walk.steps.reserve(length);
  NodeId current = start;
  for (std::uint32_t i = 0; i < length; ++i) {
    const auto& incident = graph.incident_edges(current);
    if (incident.empty()) break;
    const auto& chosen = incident[rng.index(incident.size())];
    walk.steps.push_back({chosen.edge, chosen.other});
    current = chosen.other;
  }
  return walk;
}

// k walks from u. Walk i draws from its own stream derived from
// (stream_seed, i), so walks may be generated in parallel with results
// identical to the serial order.
inline std::vector<Walk> sample_neighborhood_walks(const AttributedGraph& graph,
                                                   NodeId u,
                                                   const WalkConfig& cfg,
                                                   std::uint64_t stream_seed) {
  cfg.validate();
  std::vector<Walk> walks;
  walks.reserve(cfg.walks_per_endpoint);
  for (std::uint32_t i = 0; i < cfg.walks_per_endpoint; ++i) {
    Rng rng(derive_seed(stream_seed, {i}));
    walks.push_back(edge_random_walk(graph, u, cfg.walk_length, rng));
  }
  return walks;
}

// Nodes the walk departs from, aligned with steps: node n is the endpoint
// the n-th edge was taken from.
inline std::vector<NodeId> walk_departure_nodes(const Walk& walk) {
  std::vector<NodeId> nodes;
  nodes.reserve(walk.steps.size());
  NodeId current = walk.start;
  for (const auto& step : walk.steps) {
    nodes.push_back(current);
    current = step.node;
  }
  return nodes;
}

}  // namespace attre2vec
