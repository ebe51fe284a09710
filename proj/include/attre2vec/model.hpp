#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attre2vec/aggregation.hpp"
#include "attre2vec/common.hpp"
#include "attre2vec/graph.hpp"
#include "attre2vec/parameter_store.hpp"
#include "attre2vec/tape.hpp"
#include "attre2vec/walks.hpp"

namespace attre2vec {

struct ModelConfig {
  std::size_t edge_dim = 0;   // d_E
  std::size_t node_dim = 0;   // d_V (only consumed by concat_gru)
  std::size_t embed_dim = 64; // d
  Aggregator aggregator = Aggregator::kAvg;

  std::size_t decoder_hidden1() const { return 2 * embed_dim; }
  std::size_t decoder_hidden2() const { return (edge_dim + 1) / 2; }

  void validate() const {
    if (edge_dim == 0) throw ConfigError("model.edge_dim must be > 0");
    if (embed_dim == 0) throw ConfigError("model.embed_dim must be > 0");
    if (aggregator == Aggregator::kConcatGru && node_dim == 0)
      throw ConfigError("concat_gru aggregator requires node features");
  }
};

// The d-dimensional edge representation plus the encoder's attention over
// its three inputs (f_uv, S_u, S_v).
struct EdgeEmbedding {
  Vec h;
  std::array<double, 3> attention{};
};

// ---------------------------------------------------------------------------
// Parameter layout.
//
// Encoder: one shared transform (affine d_E -> d_E, ReLU) applied to each of
// the three inputs, a shared scalar scorer on the transformed vectors,
// softmax over the three scores, attention-weighted sum, affine projection
// to d. Sharing the transform keeps the score path identical across inputs,
// so three identical inputs always attend (1/3, 1/3, 1/3).
//
// Decoder: d -> 2d -> ceil(d_E/2) -> d_E, ReLU between layers, linear output.
// ---------------------------------------------------------------------------

inline ParameterStore register_parameters(const ModelConfig& cfg) {
  cfg.validate();
  ParameterStore store;
  const std::size_t de = cfg.edge_dim;
  const std::size_t d = cfg.embed_dim;

  store.add("enc.transform.W", {de, de});
  store.add("enc.transform.b", {de});
  store.add("enc.score.W", {1, de});
  store.add("enc.score.b", {1});
  store.add("enc.project.W", {d, de});
  store.add("enc.project.b", {d});

  const std::size_t h1 = cfg.decoder_hidden1();
  const std::size_t h2 = cfg.decoder_hidden2();
  store.add("dec.hidden1.W", {h1, d});
  store.add("dec.hidden1.b", {h1});
  store.add("dec.hidden2.W", {h2, h1});
  store.add("dec.hidden2.b", {h2});
  store.add("dec.output.W", {de, h2});
  store.add("dec.output.b", {de});

  if (cfg.aggregator == Aggregator::kGru)
    add_gru_parameters(store, "agg.gru", de, de);
  else if (cfg.aggregator == Aggregator::kConcatGru)
    add_gru_parameters(store, "agg.gru", de + cfg.node_dim, de);
  return store;
}

inline ParameterStore make_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  ParameterStore store = register_parameters(cfg);
  // uniform +-1/sqrt(fan_in) for matrices, zero biases
  Rng rng(derive_seed(seed, {0x1217}));
  for (std::size_t i = 0; i < store.size(); ++i) {
    Tensor& t = store.tensor(i);
    if (t.shape.size() != 2) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.shape[1]));
    for (double& v : t.v) v = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return store;
}

struct EncoderNodes {
  int embedding = -1;  // d
  int attention = -1;  // softmax over 3 scores (f, S_u, S_v)
};

inline EncoderNodes encoder_nodes(Tape& tape, int f, int su, int sv) {
  const int wt = tape.param("enc.transform.W");
  const int bt = tape.param("enc.transform.b");
  const int ws = tape.param("enc.score.W");
  const int bs = tape.param("enc.score.b");
  const int wp = tape.param("enc.project.W");
  const int bp = tape.param("enc.project.b");

  const std::array<int, 3> inputs{f, su, sv};
  std::array<int, 3> transformed{};
  std::vector<int> scores;
  scores.reserve(3);
  for (std::size_t i = 0; i < 3; ++i) {
    transformed[i] = tape.relu(tape.affine(wt, bt, inputs[i]));
    scores.push_back(tape.pick(tape.affine(ws, bs, transformed[i]), 0));
  }
  const int attention = tape.softmax(tape.concat(scores));
  std::vector<int> weighted;
  weighted.reserve(3);
  for (std::size_t i = 0; i < 3; ++i)
    weighted.push_back(tape.scalar_vec_mul(tape.pick(attention, i), transformed[i]));
  const int combined = tape.add_n(weighted);
  return {tape.affine(wp, bp, combined), attention};
}

inline int decoder_nodes(Tape& tape, int h) {
  const int a = tape.relu(tape.affine(tape.param("dec.hidden1.W"),
                                      tape.param("dec.hidden1.b"), h));
  const int b = tape.relu(tape.affine(tape.param("dec.hidden2.W"),
                                      tape.param("dec.hidden2.b"), a));
  return tape.affine(tape.param("dec.output.W"), tape.param("dec.output.b"), b);
}

// ---------------------------------------------------------------------------
// Forward convenience entry points (each builds a small tape internally so
// there is a single source of truth for the architecture).
// ---------------------------------------------------------------------------

inline EdgeEmbedding encode(std::span<const double> f, std::span<const double> su,
                            std::span<const double> sv, ParameterStore& store,
                            const ModelConfig& cfg) {
  if (f.size() != cfg.edge_dim || su.size() != cfg.edge_dim || sv.size() != cfg.edge_dim)
    throw ShapeError("encode: all three inputs must have width d_E");
  Tape tape(&store);
  const EncoderNodes nodes =
      encoder_nodes(tape, tape.input(f), tape.input(su), tape.input(sv));
  EdgeEmbedding out;
  auto h = tape.value(nodes.embedding);
  out.h.assign(h.begin(), h.end());
  auto att = tape.value(nodes.attention);
  out.attention = {att[0], att[1], att[2]};
  return out;
}

inline Vec decode(std::span<const double> h, ParameterStore& store,
                  const ModelConfig& cfg) {
  if (h.size() != cfg.embed_dim) throw ShapeError("decode: input must have width d");
  Tape tape(&store);
  const int out = decoder_nodes(tape, tape.input(h));
  auto v = tape.value(out);
  return Vec(v.begin(), v.end());
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double na = 0.0, nb = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
    dot += a[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw NumericFault("cosine undefined for zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Per-edge structural term: sum over positives of (1 - cos) plus sum over
// negatives of cos.
inline double cosine_structural_loss(const Vec& h, const std::vector<Vec>& positives,
                                     const std::vector<Vec>& negatives) {
  double term = 0.0;
  for (const Vec& p : positives) term += 1.0 - cosine_similarity(h, p);
  for (const Vec& n : negatives) term += cosine_similarity(h, n);
  return term;
}

// Mean of the per-edge terms over a minibatch.
inline double cosine_structural_loss_batch(
    const std::vector<Vec>& anchors,
    const std::vector<std::vector<Vec>>& positives,
    const std::vector<std::vector<Vec>>& negatives) {
  if (anchors.empty()) throw ValidationError("cosine loss: empty batch");
  if (positives.size() != anchors.size() || negatives.size() != anchors.size())
    throw ShapeError("cosine loss: batch size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i)
    total += cosine_structural_loss(anchors[i], positives[i], negatives[i]);
  return total / static_cast<double>(anchors.size());
}

// (1/|B|) sum over the batch of the squared reconstruction error, summed
// over feature dimensions.
inline double mse_reconstruction_loss(
    const std::vector<std::pair<Vec, Vec>>& pairs, ParameterStore& store,
    const ModelConfig& cfg) {
  if (pairs.empty()) throw ValidationError("mse loss: empty batch");
  double total = 0.0;
  for (const auto& [h, f] : pairs) {
    const Vec decoded = decode(h, store, cfg);
    if (decoded.size() != f.size()) throw ShapeError("mse loss: feature width mismatch");
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double d = decoded[i] - f[i];
      err += d * d;
    }
    total += err;
  }
  return total / static_cast<double>(pairs.size());
}

inline double total_loss(double structural, double reconstruction, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError("lambda must lie in [0,1]");
  return lambda * structural + (1.0 - lambda) * reconstruction;
}

// ---------------------------------------------------------------------------
// Per-edge embedding subgraph shared by training and inference.
// ---------------------------------------------------------------------------

// Walks for one endpoint of one edge, already sampled.
struct EndpointWalks {
  NodeId node = 0;
  std::vector<Walk> walks;
};

// Builds the neighborhood summary node S for one endpoint.
inline int neighborhood_summary_node(Tape& tape, const AttributedGraph& graph,
                                     const ModelConfig& cfg,
                                     const EndpointWalks& ep) {
  switch (cfg.aggregator) {
    case Aggregator::kAvg:
    case Aggregator::kExp: {
      std::vector<WalkSummary> summaries;
      summaries.reserve(ep.walks.size());
      for (const Walk& w : ep.walks) {
        const auto rows = walk_edge_feature_rows(graph, w);
        summaries.push_back(cfg.aggregator == Aggregator::kAvg
                                ? aggregate_walk_avg(rows, cfg.edge_dim)
                                : aggregate_walk_exp(rows, cfg.edge_dim));
      }
      const WalkSummary s = aggregate_neighborhood(summaries, cfg.edge_dim);
      return tape.input(s.value);
    }
    case Aggregator::kGru:
    case Aggregator::kConcatGru: {
      std::vector<int> summary_nodes;
      summary_nodes.reserve(ep.walks.size());
      for (const Walk& w : ep.walks) {
        std::vector<int> inputs;
        inputs.reserve(w.steps.size());
        if (cfg.aggregator == Aggregator::kGru) {
          for (const auto& row : walk_edge_feature_rows(graph, w))
            inputs.push_back(tape.input(row));
        } else {
          const auto edge_rows = walk_edge_feature_rows(graph, w);
          const auto node_rows = walk_node_feature_rows(graph, w);
          for (std::size_t i = 0; i < edge_rows.size(); ++i)
            inputs.push_back(tape.concat(
                {tape.input(edge_rows[i]), tape.input(node_rows[i])}));
        }
        summary_nodes.push_back(
            gru_sequence_node(tape, "agg.gru", cfg.edge_dim, inputs));
      }
      if (summary_nodes.empty()) return tape.zeros(cfg.edge_dim);
      return tape.mean_n(std::move(summary_nodes));
    }
  }
  throw ConfigError("unknown aggregator");
}

inline EncoderNodes edge_embedding_nodes(Tape& tape, const AttributedGraph& graph,
                                         const ModelConfig& cfg,
                                         std::size_t edge_index,
                                         const EndpointWalks& side_u,
                                         const EndpointWalks& side_v) {
  const int f = tape.input(graph.edge_features(edge_index));
  const int su = neighborhood_summary_node(tape, graph, cfg, side_u);
  const int sv = neighborhood_summary_node(tape, graph, cfg, side_v);
  return encoder_nodes(tape, f, su, sv);
}

// ---------------------------------------------------------------------------
// Inference: k walks from both endpoints, walk aggregation, neighborhood
// aggregation, encode. Touches only features and walks, so edges absent
// from training produce embeddings without retraining. Walk streams derive
// from (seed, u, v, endpoint side), making results independent of edge
// ordering and safe to parallelize per edge.
// ---------------------------------------------------------------------------

inline EndpointWalks sample_endpoint_walks(const AttributedGraph& graph,
                                           const EdgeKey& edge, int side,
                                           const WalkConfig& walk_cfg) {
  const NodeId node = side == 0 ? edge.u : edge.v;
  EndpointWalks ep;
  ep.node = node;
  ep.walks = sample_neighborhood_walks(
      graph, node, walk_cfg,
      derive_seed(walk_cfg.seed,
                  {edge.u, edge.v, static_cast<std::uint64_t>(side)}));
  return ep;
}

inline std::vector<EdgeEmbedding> infer_embeddings(
    const AttributedGraph& graph, const std::vector<EdgeKey>& edges,
    const WalkConfig& walk_cfg, const ModelConfig& cfg, ParameterStore& store) {
  cfg.validate();
  std::vector<EdgeEmbedding> out;
  out.reserve(edges.size());
  for (const EdgeKey& key : edges) {
    const std::size_t idx = graph.edge_index(key);
    const EndpointWalks side_u = sample_endpoint_walks(graph, key, 0, walk_cfg);
    const EndpointWalks side_v = sample_endpoint_walks(graph, key, 1, walk_cfg);
    Tape tape(&store);
    const EncoderNodes nodes =
        edge_embedding_nodes(tape, graph, cfg, idx, side_u, side_v);
    EdgeEmbedding emb;
    auto h = tape.value(nodes.embedding);
    emb.h.assign(h.begin(), h.end());
    auto att = tape.value(nodes.attention);
    emb.attention = {att[0], att[1], att[2]};
    out.push_back(std::move(emb));
  }
  return out;
}

}  // namespace attre2vec
