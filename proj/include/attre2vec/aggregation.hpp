#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "attre2vec/common.hpp"
#include "attre2vec/graph.hpp"
#include "attre2vec/parameter_store.hpp"
#include "attre2vec/tape.hpp"
#include "attre2vec/walks.hpp"

namespace attre2vec {

enum class Aggregator { kAvg, kExp, kGru, kConcatGru };

inline const char* aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::kAvg: return "avg";
    case Aggregator::kExp: return "exp";
    case Aggregator::kGru: return "gru";
    case Aggregator::kConcatGru: return "concat_gru";
  }
  return "?";
}

inline Aggregator parse_aggregator(const std::string& name) {
  if (name == "avg") return Aggregator::kAvg;
  if (name == "exp") return Aggregator::kExp;
  if (name == "gru") return Aggregator::kGru;
  if (name == "concat_gru") return Aggregator::kConcatGru;
  throw ConfigError("unknown aggregator '" + name +
                    "' (expected avg|exp|gru|concat_gru)");
}

// One walk collapsed to a d_E vector. degenerate marks an empty walk
// (isolated start node); its vector is zero.
struct WalkSummary {
  Vec value;
  bool degenerate = false;
};

// (1/L') sum of the rows.
inline WalkSummary aggregate_walk_avg(
    const std::vector<std::span<const double>>& rows, std::size_t dim) {
  WalkSummary s;
  s.value.assign(dim, 0.0);
  if (rows.empty()) {
    s.degenerate = true;
    return s;
  }
  for (const auto& row : rows) {
    if (row.size() != dim) throw ShapeError("aggregate_walk_avg: row width mismatch");
    for (std::size_t i = 0; i < dim; ++i) s.value[i] += row[i];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& v : s.value) v *= inv;
  return s;
}

// (1/L') sum of e^{-n} weighted rows, n = 1 at the first edge. The e^{-n}
// weights do not sum to 1; the printed formula keeps the 1/L' prefactor
// regardless.
inline WalkSummary aggregate_walk_exp(
    const std::vector<std::span<const double>>& rows, std::size_t dim) {
  WalkSummary s;
  s.value.assign(dim, 0.0);
  if (rows.empty()) {
    s.degenerate = true;
    return s;
  }
  for (std::size_t n = 0; n < rows.size(); ++n) {
    if (rows[n].size() != dim) throw ShapeError("aggregate_walk_exp: row width mismatch");
    const double w = std::exp(-static_cast<double>(n + 1));
    for (std::size_t i = 0; i < dim; ++i) s.value[i] += w * rows[n][i];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& v : s.value) v *= inv;
  return s;
}

// Arithmetic mean of the k walk summaries.
inline WalkSummary aggregate_neighborhood(const std::vector<WalkSummary>& summaries,
                                          std::size_t dim) {
  WalkSummary s;
  s.value.assign(dim, 0.0);
  if (summaries.empty()) {
    s.degenerate = true;
    return s;
  }
  for (const auto& summary : summaries) {
    if (summary.value.size() != dim)
      throw ShapeError("aggregate_neighborhood: width mismatch");
    for (std::size_t i = 0; i < dim; ++i) s.value[i] += summary.value[i];
  }
  const double inv = 1.0 / static_cast<double>(summaries.size());
  for (double& v : s.value) v *= inv;
  return s;
}

// ---------------------------------------------------------------------------
// GRU walk aggregation. Standard cell (update gate, reset gate, candidate
// with reset-gated hidden):
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wh x + Uh (r * h) + bh)
//   h' = (1 - z) * h + z * n
// The walk is consumed in reverse order (last edge first) from a zero
// initial hidden state.
// ---------------------------------------------------------------------------

inline void add_gru_parameters(ParameterStore& store, const std::string& prefix,
                               std::size_t input_dim, std::size_t hidden_dim) {
  for (const char* gate : {"update", "reset", "candidate"}) {
    store.add(prefix + "." + gate + ".W", {hidden_dim, input_dim});
    store.add(prefix + "." + gate + ".U", {hidden_dim, hidden_dim});
    store.add(prefix + "." + gate + ".b", {hidden_dim});
  }
}

// inputs are step feature nodes in walk order; returns the final hidden node.
inline int gru_sequence_node(Tape& tape, const std::string& prefix,
                             std::size_t hidden_dim,
                             const std::vector<int>& inputs) {
  const int wz = tape.param(prefix + ".update.W");
  const int uz = tape.param(prefix + ".update.U");
  const int bz = tape.param(prefix + ".update.b");
  const int wr = tape.param(prefix + ".reset.W");
  const int ur = tape.param(prefix + ".reset.U");
  const int br = tape.param(prefix + ".reset.b");
  const int wh = tape.param(prefix + ".candidate.W");
  const int uh = tape.param(prefix + ".candidate.U");
  const int bh = tape.param(prefix + ".candidate.b");

  int h = tape.zeros(hidden_dim);
  for (std::size_t idx = inputs.size(); idx-- > 0;) {
    const int x = inputs[idx];
    const int z = tape.sigmoid(tape.add(tape.affine(wz, bz, x), tape.affine(uz, -1, h)));
    const int r = tape.sigmoid(tape.add(tape.affine(wr, br, x), tape.affine(ur, -1, h)));
    const int cand =
        tape.tanh_op(tape.add(tape.affine(wh, bh, x), tape.affine(uh, -1, tape.mul(r, h))));
    const int keep = tape.shift(tape.scale(z, -1.0), 1.0);  // 1 - z
    h = tape.add(tape.mul(keep, h), tape.mul(z, cand));
  }
  return h;
}

// Convenience forward: aggregate one walk's edge-feature rows with the GRU.
inline WalkSummary aggregate_walk_gru(
    const std::vector<std::span<const double>>& rows, ParameterStore& store,
    const std::string& prefix, std::size_t hidden_dim) {
  const std::size_t input_dim = store.tensor(prefix + ".update.W").shape[1];
  for (const auto& row : rows)
    if (row.size() != input_dim)
      throw ShapeError("aggregate_walk_gru: row width " +
                       std::to_string(row.size()) + " != GRU input width " +
                       std::to_string(input_dim));
  Tape tape(&store);
  std::vector<int> inputs;
  inputs.reserve(rows.size());
  for (const auto& row : rows) inputs.push_back(tape.input(row));
  const int h = gru_sequence_node(tape, prefix, hidden_dim, inputs);
  WalkSummary s;
  auto value = tape.value(h);
  s.value.assign(value.begin(), value.end());
  s.degenerate = rows.empty();
  return s;
}

// ConcatGRU: per-step input is the edge features concatenated with the
// features of the node the step departs from.
inline WalkSummary aggregate_walk_concat_gru(
    const std::vector<std::span<const double>>& edge_rows,
    const std::vector<std::span<const double>>& node_rows,
    ParameterStore& store, const std::string& prefix, std::size_t hidden_dim) {
  if (edge_rows.size() != node_rows.size())
    throw ShapeError("aggregate_walk_concat_gru: " +
                     std::to_string(edge_rows.size()) + " edge rows vs " +
                     std::to_string(node_rows.size()) + " node rows");
  const std::size_t input_dim = store.tensor(prefix + ".update.W").shape[1];
  Tape tape(&store);
  std::vector<int> inputs;
  inputs.reserve(edge_rows.size());
  for (std::size_t i = 0; i < edge_rows.size(); ++i) {
    if (edge_rows[i].size() + node_rows[i].size() != input_dim)
      throw ShapeError("aggregate_walk_concat_gru: concatenated width mismatch");
    inputs.push_back(
        tape.concat({tape.input(edge_rows[i]), tape.input(node_rows[i])}));
  }
  const int h = gru_sequence_node(tape, prefix, hidden_dim, inputs);
  WalkSummary s;
  auto value = tape.value(h);
  s.value.assign(value.begin(), value.end());
  s.degenerate = edge_rows.empty();
  return s;
}

// --- helpers for pulling walk features out of a graph ---------------------

inline std::vector<std::span<const double>> walk_edge_feature_rows(
    const AttributedGraph& graph, const Walk& walk) {
  std::vector<std::span<const double>> rows;
  rows.reserve(walk.steps.size());
  for (const auto& step : walk.steps) rows.push_back(graph.edge_features(step.edge));
  return rows;
}

inline std::vector<std::span<const double>> walk_node_feature_rows(
    const AttributedGraph& graph, const Walk& walk) {
  std::vector<std::span<const double>> rows;
  rows.reserve(walk.steps.size());
  for (NodeId u : walk_departure_nodes(walk)) rows.push_back(graph.node_features(u));
  return rows;
}

}  // namespace attre2vec
