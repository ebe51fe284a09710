#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "attre2vec/adamw.hpp"
#include "attre2vec/common.hpp"
#include "attre2vec/data.hpp"
#include "attre2vec/eval.hpp"
#include "attre2vec/model.hpp"
#include "attre2vec/tape.hpp"
#include "attre2vec/walks.hpp"

namespace attre2vec {

struct TrainConfig {
  std::uint32_t walks_per_endpoint = 16;  // k
  std::uint32_t walk_length = 8;          // L
  std::size_t embed_dim = 64;             // d
  double lambda = 0.5;
  std::size_t positives_per_edge = 5;     // |h+|
  std::size_t negatives_per_edge = 10;    // |h-|
  AdamWConfig optimizer{};                // lr 0.001, wd 0.01
  std::size_t patience = 15;              // epochs without val AUC improvement
  std::size_t max_epochs = 100;
  std::size_t batch_size = 64;
  Aggregator aggregator = Aggregator::kAvg;
  // transductive: anchors are all graph edges and nothing is removed from
  // the walk graph; inductive: test edges are removed and anchors are the
  // train split only.
  bool transductive = false;
  double lr_l2_strength = 1.0;  // validation logistic regression
  std::uint64_t seed = 0;

  void validate() const {
    if (walks_per_endpoint < 1) throw ConfigError("train.k must be >= 1");
    if (walk_length < 1) throw ConfigError("train.walk_length must be >= 1");
    if (embed_dim < 1) throw ConfigError("train.embed_dim must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw ConfigError("train.lambda must lie in [0,1]");
    if (positives_per_edge < 1) throw ConfigError("train.n_pos must be >= 1");
    if (negatives_per_edge < 1) throw ConfigError("train.n_neg must be >= 1");
    if (patience < 1) throw ConfigError("train.patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (lr_l2_strength < 0.0)
      throw ConfigError("train.lr_l2_strength must be >= 0");
    optimizer.validate();
  }

  std::string echo() const {
    std::ostringstream s;
    s << "k=" << walks_per_endpoint << " L=" << walk_length
      << " d=" << embed_dim << " lambda=" << lambda
      << " n_pos=" << positives_per_edge << " n_neg=" << negatives_per_edge
      << " lr=" << optimizer.lr << " wd=" << optimizer.weight_decay
      << " patience=" << patience << " max_epochs=" << max_epochs
      << " batch_size=" << batch_size
      << " aggregator=" << aggregator_name(aggregator)
      << " mode=" << (transductive ? "transductive" : "inductive")
      << " seed=" << seed;
    return s.str();
  }
};

struct EpochStats {
  double loss = 0.0;
  double loss_cos = 0.0;
  double loss_mse = 0.0;
  double val_auc = 0.0;
};

struct RunReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based
  double wall_seconds = 0.0;
  std::string config_echo;
  std::string checkpoint_ref;
};

struct TrainResult {
  ModelConfig model;
  ParameterStore params;  // snapshot at best_epoch
  RunReport report;
};

// ---------------------------------------------------------------------------
// Positive/negative sampling (per anchor edge and epoch walk set)
// ---------------------------------------------------------------------------

// Sorted unique edge indices appearing in the anchor's 2k walks, anchor
// excluded.
inline std::vector<std::size_t> walk_edge_pool(const std::vector<Walk>& walks_u,
                                               const std::vector<Walk>& walks_v,
                                               std::size_t anchor) {
  std::vector<std::size_t> pool;
  for (const auto* walks : {&walks_u, &walks_v})
    for (const Walk& w : *walks)
      for (const WalkStep& step : w.steps)
        if (step.edge != anchor) pool.push_back(step.edge);
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  return pool;
}

// Uniform draw of n items: without replacement when the pool is large
// enough, with replacement otherwise. Empty pool -> skip-edge signal.
inline std::optional<std::vector<std::size_t>> sample_from_pool(
    const std::vector<std::size_t>& pool, std::size_t n, Rng& rng) {
  if (pool.empty()) return std::nullopt;
  std::vector<std::size_t> out;
  out.reserve(n);
  if (pool.size() >= n) {
    std::vector<std::size_t> copy = pool;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + rng.index(copy.size() - i);
      std::swap(copy[i], copy[j]);
      out.push_back(copy[i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.index(pool.size())]);
  }
  return out;
}

inline std::optional<std::vector<std::size_t>> sample_positives(
    const std::vector<std::size_t>& pool, std::size_t n_pos, Rng& rng) {
  return sample_from_pool(pool, n_pos, rng);
}

// Uniform from all edges minus the walk pool minus the anchor.
inline std::optional<std::vector<std::size_t>> sample_negatives(
    const std::vector<std::size_t>& pool, std::size_t anchor,
    std::size_t edge_count, std::size_t n_neg, Rng& rng) {
  std::vector<std::size_t> complement;
  complement.reserve(edge_count);
  std::size_t p = 0;
  for (std::size_t e = 0; e < edge_count; ++e) {
    while (p < pool.size() && pool[p] < e) ++p;
    if (p < pool.size() && pool[p] == e) continue;
    if (e == anchor) continue;
    complement.push_back(e);
  }
  return sample_from_pool(complement, n_neg, rng);
}

// ---------------------------------------------------------------------------
// Early stopping on validation AUC: stop after `patience` epochs without a
// strict improvement; the returned checkpoint is the best epoch's.
// ---------------------------------------------------------------------------

class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  // Returns true when `metric` strictly improves on the best seen.
  bool observe(std::size_t epoch, double metric) {
    if (metric > best_metric_) {
      best_metric_ = metric;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }

  bool should_stop(std::size_t epoch) const {
    return epoch - best_epoch_ >= patience_;
  }

  std::size_t best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_metric_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_metric_ = -std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace detail {

enum SeedTag : std::uint64_t {
  kInitTag = 1,
  kWalkTag = 2,
  kOrderTag = 3,
  kSampleTag = 4,
  kEvalTag = 5,
};

struct TrainView {
  Subgraph sub;                          // walk/anchor graph
  std::vector<std::size_t> anchors;      // sub edge indices
  std::vector<std::size_t> lr_train;     // sub edge indices
  std::vector<std::size_t> lr_val;       // sub edge indices
  std::vector<int> labels;               // per sub edge
};

inline TrainView make_train_view(const DatasetBundle& bundle,
                                 const SplitSpec& split,
                                 const TrainConfig& cfg) {
  TrainView view;
  const std::size_t bundle_edges = bundle.graph.edge_count();
  std::vector<std::size_t> keep;
  if (cfg.transductive) {
    keep.resize(bundle_edges);
    for (std::size_t e = 0; e < bundle_edges; ++e) keep[e] = e;
  } else {
    std::vector<char> held_out(bundle_edges, 0);
    for (std::size_t e : split.test) held_out[e] = 1;
    for (std::size_t e = 0; e < bundle_edges; ++e)
      if (!held_out[e]) keep.push_back(e);
  }
  view.sub = edge_subgraph(bundle.graph, keep);

  std::vector<std::size_t> bundle_to_sub(bundle_edges,
                                         std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < view.sub.source_edge.size(); ++i)
    bundle_to_sub[view.sub.source_edge[i]] = i;

  const auto map_edges = [&](const std::vector<std::size_t>& src) {
    std::vector<std::size_t> out;
    out.reserve(src.size());
    for (std::size_t e : src) {
      if (bundle_to_sub[e] == std::numeric_limits<std::size_t>::max())
        throw ValidationError("split references an edge missing from the training graph");
      out.push_back(bundle_to_sub[e]);
    }
    return out;
  };
  view.lr_train = map_edges(split.train);
  view.lr_val = map_edges(split.val);

  if (cfg.transductive) {
    view.anchors.resize(view.sub.graph.edge_count());
    for (std::size_t e = 0; e < view.anchors.size(); ++e) view.anchors[e] = e;
  } else {
    view.anchors = view.lr_train;
  }

  view.labels.reserve(view.sub.source_edge.size());
  for (std::size_t src : view.sub.source_edge)
    view.labels.push_back(bundle.labels[src]);
  return view;
}

inline LabeledEmbeddingSet embedding_set(const std::vector<EdgeEmbedding>& embs,
                                         const std::vector<std::size_t>& edges,
                                         const std::vector<int>& labels,
                                         int class_count) {
  LabeledEmbeddingSet set;
  set.class_count = class_count;
  const std::size_t d = embs.empty() ? 0 : embs.front().h.size();
  set.features = Matrix(embs.size(), d);
  set.labels.reserve(edges.size());
  for (std::size_t i = 0; i < embs.size(); ++i) {
    std::copy(embs[i].h.begin(), embs[i].h.end(), set.features.row(i).begin());
    set.labels.push_back(labels[edges[i]]);
  }
  return set;
}

}  // namespace detail

inline TrainResult train(const DatasetBundle& bundle, const SplitSpec& split,
                         const TrainConfig& cfg) {
  const auto start_time = std::chrono::steady_clock::now();
  cfg.validate();
  if (!bundle.has_labels)
    throw ConfigError("training requires edge labels for validation AUC");
  if (split.train.empty()) throw ValidationError("train split is empty");
  if (split.val.empty()) throw ValidationError("validation split is empty");

  detail::TrainView view = detail::make_train_view(bundle, split, cfg);
  const AttributedGraph& graph = view.sub.graph;
  const std::size_t edge_count = graph.edge_count();

  ModelConfig model_cfg;
  model_cfg.edge_dim = graph.edge_dim();
  model_cfg.node_dim = graph.node_dim();
  model_cfg.embed_dim = cfg.embed_dim;
  model_cfg.aggregator = cfg.aggregator;
  model_cfg.validate();

  ParameterStore store =
      make_parameters(model_cfg, derive_seed(cfg.seed, {detail::kInitTag}));
  AdamW optimizer(cfg.optimizer);
  EarlyStopper stopper(cfg.patience);

  WalkConfig walk_cfg{cfg.walks_per_endpoint, cfg.walk_length, 0};
  WalkConfig eval_walk_cfg{cfg.walks_per_endpoint, cfg.walk_length,
                           derive_seed(cfg.seed, {detail::kEvalTag})};

  std::vector<std::size_t> eval_edges = view.lr_train;
  eval_edges.insert(eval_edges.end(), view.lr_val.begin(), view.lr_val.end());
  std::vector<EdgeKey> eval_keys;
  eval_keys.reserve(eval_edges.size());
  for (std::size_t e : eval_edges) eval_keys.push_back(graph.edges()[e]);

  ParameterStore best_params = store;
  RunReport report;
  report.config_echo = cfg.echo();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    // fresh walks each epoch: one derived stream per (edge, endpoint)
    std::vector<std::array<std::vector<Walk>, 2>> walks(edge_count);
    std::vector<std::vector<std::size_t>> pools(edge_count);
    for (std::size_t e = 0; e < edge_count; ++e) {
      const EdgeKey key = graph.edges()[e];
      for (int side = 0; side < 2; ++side) {
        const NodeId node = side == 0 ? key.u : key.v;
        walks[e][static_cast<std::size_t>(side)] = sample_neighborhood_walks(
            graph, node, walk_cfg,
            derive_seed(cfg.seed, {detail::kWalkTag, epoch, e,
                                   static_cast<std::uint64_t>(side)}));
      }
      pools[e] = walk_edge_pool(walks[e][0], walks[e][1], e);
    }

    std::vector<std::size_t> order = view.anchors;
    {
      Rng rng(derive_seed(cfg.seed, {detail::kOrderTag, epoch}));
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t j = i + rng.index(order.size() - i);
        std::swap(order[i], order[j]);
      }
    }

    double cos_sum = 0.0, mse_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0, step_index = 0; begin < order.size();
         begin += cfg.batch_size, ++step_index) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      Rng sample_rng(
          derive_seed(cfg.seed, {detail::kSampleTag, epoch, step_index}));

      struct BatchEntry {
        std::size_t anchor;
        std::vector<std::size_t> positives;
        std::vector<std::size_t> negatives;
      };
      std::vector<BatchEntry> batch;
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t anchor = order[i];
        auto pos = sample_positives(pools[anchor], cfg.positives_per_edge,
                                    sample_rng);
        auto neg = sample_negatives(pools[anchor], anchor, edge_count,
                                    cfg.negatives_per_edge, sample_rng);
        if (!pos || !neg) continue;  // skip-edge signal
        batch.push_back({anchor, std::move(*pos), std::move(*neg)});
      }
      if (batch.empty()) continue;

      try {
        store.zero_grads();
        Tape tape(&store);
        std::unordered_map<std::size_t, int> embedding_of;
        const auto embed = [&](std::size_t e) {
          auto it = embedding_of.find(e);
          if (it != embedding_of.end()) return it->second;
          const EdgeKey key = graph.edges()[e];
          const EncoderNodes nodes = edge_embedding_nodes(
              tape, graph, model_cfg, e, EndpointWalks{key.u, walks[e][0]},
              EndpointWalks{key.v, walks[e][1]});
          embedding_of.emplace(e, nodes.embedding);
          return nodes.embedding;
        };

        std::vector<int> cos_terms, mse_terms;
        cos_terms.reserve(batch.size());
        mse_terms.reserve(batch.size());
        for (const BatchEntry& entry : batch) {
          const int h = embed(entry.anchor);
          std::vector<int> terms;
          terms.reserve(entry.positives.size() + entry.negatives.size());
          for (std::size_t p : entry.positives)
            terms.push_back(tape.shift(tape.scale(tape.cosine(h, embed(p)), -1.0), 1.0));
          for (std::size_t n : entry.negatives)
            terms.push_back(tape.cosine(h, embed(n)));
          cos_terms.push_back(tape.add_n(std::move(terms)));
          const int f = tape.input(graph.edge_features(entry.anchor));
          mse_terms.push_back(tape.sqdiff(decoder_nodes(tape, h), f));
        }
        const int l_cos = tape.mean_n(std::move(cos_terms));
        const int l_mse = tape.mean_n(std::move(mse_terms));
        const int total = tape.add(tape.scale(l_cos, cfg.lambda),
                                   tape.scale(l_mse, 1.0 - cfg.lambda));
        tape.forward_backward(total);
        optimizer.step(store);
        cos_sum += tape.value_scalar(l_cos);
        mse_sum += tape.value_scalar(l_mse);
        ++steps;
      } catch (const NumericFault& fault) {
        throw NumericFault("epoch " + std::to_string(epoch) + ": " + fault.what());
      }
    }
    if (steps == 0)
      throw ValidationError(
          "epoch " + std::to_string(epoch) +
          ": every anchor edge was skip-signaled; graph unusable for training");

    EpochStats stats;
    stats.loss_cos = cos_sum / static_cast<double>(steps);
    stats.loss_mse = mse_sum / static_cast<double>(steps);
    stats.loss = total_loss(stats.loss_cos, stats.loss_mse, cfg.lambda);

    const std::vector<EdgeEmbedding> eval_embs =
        infer_embeddings(graph, eval_keys, eval_walk_cfg, model_cfg, store);
    const std::vector<EdgeEmbedding> train_embs(
        eval_embs.begin(), eval_embs.begin() + static_cast<long>(view.lr_train.size()));
    const std::vector<EdgeEmbedding> val_embs(
        eval_embs.begin() + static_cast<long>(view.lr_train.size()), eval_embs.end());
    const LabeledEmbeddingSet train_set = detail::embedding_set(
        train_embs, view.lr_train, view.labels, bundle.class_count);
    const LabeledEmbeddingSet val_set = detail::embedding_set(
        val_embs, view.lr_val, view.labels, bundle.class_count);
    const LogisticRegressionModel lr =
        logistic_regression_fit(train_set, cfg.lr_l2_strength);
    stats.val_auc = auc_score(lr.predict_proba(val_set.features), val_set.labels);

    if (stopper.observe(epoch, stats.val_auc)) best_params = store;
    report.epochs.push_back(stats);
    log_debug("epoch " + std::to_string(epoch) + " loss " +
              std::to_string(stats.loss) + " val_auc " +
              std::to_string(stats.val_auc));
    if (stopper.should_stop(epoch)) break;
  }

  report.best_epoch = stopper.best_epoch();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
          .count();
  return {model_cfg, std::move(best_params), std::move(report)};
}

}  // namespace attre2vec
