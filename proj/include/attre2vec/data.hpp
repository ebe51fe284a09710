#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "attre2vec/common.hpp"
#include "attre2vec/graph.hpp"

namespace attre2vec {

// ---------------------------------------------------------------------------
// CSV primitives. UTF-8, comma-delimited, '#' comment lines ignored.
// ---------------------------------------------------------------------------

namespace csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

inline std::vector<Row> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    Row row;
    row.line = line_no;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      row.fields.push_back(line.substr(start, end - start));
      start = end + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline double parse_real(const std::string& field, const std::string& path,
                         std::size_t line) {
  try {
    std::size_t consumed = 0;
    const double value = std::stod(field, &consumed);
    if (consumed != field.size()) throw std::invalid_argument(field);
    return value;
  } catch (const std::exception&) {
    throw ValidationError(path + ":" + std::to_string(line) +
                          ": malformed real '" + field + "'");
  }
}

inline long parse_int(const std::string& field, const std::string& path,
                      std::size_t line) {
  try {
    std::size_t consumed = 0;
    const long value = std::stol(field, &consumed);
    if (consumed != field.size()) throw std::invalid_argument(field);
    return value;
  } catch (const std::exception&) {
    throw ValidationError(path + ":" + std::to_string(line) +
                          ": malformed integer '" + field + "'");
  }
}

inline bool looks_numeric(const std::string& field) {
  try {
    std::size_t consumed = 0;
    (void)std::stod(field, &consumed);
    return consumed == field.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Dataset bundle and loading
// ---------------------------------------------------------------------------

struct DatasetBundle {
  AttributedGraph graph;
  std::vector<int> labels;  // per edge, aligned with graph.edges()
  int class_count = 0;
  bool has_labels = false;
  std::string provenance;

  int label_of(std::size_t edge_index) const { return labels[edge_index]; }
};

// Per-column zero mean, unit population variance. Constant columns are
// centered only.
inline void standardize_columns(Matrix& m) {
  for (std::size_t j = 0; j < m.cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) mean += m.at(i, j);
    mean /= static_cast<double>(m.rows);
    double var = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
      const double d = m.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(m.rows);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < m.rows; ++i)
      m.at(i, j) = (m.at(i, j) - mean) / sd;
  }
}

// Feature CSV: one header row, then one row of reals per entity.
inline Matrix load_feature_matrix(const std::string& path) {
  const auto rows = csv::read_rows(path);
  if (rows.empty()) throw ValidationError(path + ": empty feature file");
  const std::size_t cols = rows.front().fields.size();
  Matrix m(rows.size() - 1, cols);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].fields.size() != cols)
      throw ValidationError(path + ":" + std::to_string(rows[i].line) +
                            ": expected " + std::to_string(cols) + " columns, got " +
                            std::to_string(rows[i].fields.size()));
    for (std::size_t j = 0; j < cols; ++j)
      m.at(i - 1, j) = csv::parse_real(rows[i].fields[j], path, rows[i].line);
  }
  return m;
}

// Edge CSV: src,dst[,label] with an optional header line.
inline void load_edge_list(const std::string& path,
                           std::vector<std::pair<NodeId, NodeId>>* edges,
                           std::vector<int>* labels, bool* any_labels) {
  const auto rows = csv::read_rows(path);
  edges->clear();
  labels->clear();
  *any_labels = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (i == 0 && !csv::looks_numeric(row.fields[0])) continue;  // header
    if (row.fields.size() != 2 && row.fields.size() != 3)
      throw ValidationError(path + ":" + std::to_string(row.line) +
                            ": expected src,dst[,label]");
    const long a = csv::parse_int(row.fields[0], path, row.line);
    const long b = csv::parse_int(row.fields[1], path, row.line);
    if (a < 0 || b < 0)
      throw ValidationError(path + ":" + std::to_string(row.line) +
                            ": negative node id");
    edges->emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
    if (row.fields.size() == 3) {
      labels->push_back(
          static_cast<int>(csv::parse_int(row.fields[2], path, row.line)));
      *any_labels = true;
    } else {
      labels->push_back(-1);
    }
  }
  if (*any_labels)
    for (std::size_t i = 0; i < labels->size(); ++i)
      if ((*labels)[i] < 0)
        throw ValidationError(path + ": edge " + std::to_string(i) +
                              " is missing a label present on other edges");
}

// Label CSV: optional header, one integer per row, aligned with the edge
// list.
inline std::vector<int> load_label_column(const std::string& path) {
  const auto rows = csv::read_rows(path);
  std::vector<int> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (i == 0 && !csv::looks_numeric(row.fields[0])) continue;
    if (row.fields.size() != 1)
      throw ValidationError(path + ":" + std::to_string(row.line) +
                            ": expected a single label column");
    labels.push_back(
        static_cast<int>(csv::parse_int(row.fields[0], path, row.line)));
  }
  return labels;
}

inline int count_classes(const std::vector<int>& labels) {
  int c = 0;
  for (int y : labels) {
    if (y < 0) throw ValidationError("negative class label");
    c = std::max(c, y + 1);
  }
  return c;
}

inline DatasetBundle load_dataset(const std::string& edges_csv,
                                  const std::string& node_features_csv,
                                  const std::string& edge_features_csv,
                                  const std::string& labels_csv = "",
                                  bool standardize = true) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<int> labels;
  bool inline_labels = false;
  load_edge_list(edges_csv, &edges, &labels, &inline_labels);

  Matrix node_features = load_feature_matrix(node_features_csv);
  Matrix edge_features = load_feature_matrix(edge_features_csv);
  if (edge_features.rows != edges.size())
    throw ValidationError(edge_features_csv + ": " +
                          std::to_string(edge_features.rows) +
                          " feature rows for " + std::to_string(edges.size()) +
                          " edges in " + edges_csv);

  if (!labels_csv.empty()) {
    if (inline_labels)
      throw ValidationError("labels given both inline in " + edges_csv +
                            " and in " + labels_csv);
    labels = load_label_column(labels_csv);
    if (labels.size() != edges.size())
      throw ValidationError(labels_csv + ": " + std::to_string(labels.size()) +
                            " labels for " + std::to_string(edges.size()) +
                            " edges");
    inline_labels = true;
  }

  if (standardize) standardize_columns(edge_features);

  DatasetBundle bundle;
  bundle.graph =
      build_graph(edges, std::move(node_features), std::move(edge_features));
  bundle.has_labels = inline_labels;
  bundle.labels = inline_labels ? std::move(labels)
                                : std::vector<int>(edges.size(), -1);
  bundle.class_count = inline_labels ? count_classes(bundle.labels) : 0;
  bundle.provenance = "files:" + edges_csv;
  return bundle;
}

// ---------------------------------------------------------------------------
// Split generation. Train takes `per_class` edges per class; validation and
// test are random from the remainder. On desk-scale graphs the requested
// sizes are infeasible; they shrink (train per-class capped at half the
// smallest class, remainder divided val:test by the requested ratio) with a
// warning.
// ---------------------------------------------------------------------------

struct SplitSpec {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::size_t repeat_index = 0;
};

inline std::vector<SplitSpec> make_splits(const DatasetBundle& bundle,
                                          std::size_t per_class = 20,
                                          std::size_t n_val = 1000,
                                          std::size_t n_test = 1000,
                                          std::size_t repeats = 10,
                                          std::uint64_t seed = 0) {
  if (!bundle.has_labels)
    throw ConfigError("make_splits requires a labeled dataset");
  if (repeats == 0) throw ConfigError("make_splits: repeats must be >= 1");
  if (per_class == 0) throw ConfigError("make_splits: per_class must be >= 1");
  if (n_val == 0 || n_test == 0)
    throw ConfigError("make_splits: n_val and n_test must be >= 1");
  const std::size_t edge_count = bundle.graph.edge_count();
  const std::size_t classes = static_cast<std::size_t>(bundle.class_count);

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t e = 0; e < edge_count; ++e)
    by_class[static_cast<std::size_t>(bundle.labels[e])].push_back(e);
  std::size_t min_class = edge_count;
  for (std::size_t c = 0; c < classes; ++c) {
    if (by_class[c].empty())
      throw ValidationError("class " + std::to_string(c) + " has no edges");
    min_class = std::min(min_class, by_class[c].size());
  }

  std::size_t per_class_eff = per_class;
  std::size_t val_eff = n_val;
  std::size_t test_eff = n_test;
  const bool feasible = per_class <= min_class &&
                        per_class * classes + n_val + n_test <= edge_count;
  if (!feasible) {
    per_class_eff = std::max<std::size_t>(1, std::min(per_class, min_class / 2));
    while (per_class_eff > 1 && per_class_eff * classes + 2 > edge_count)
      --per_class_eff;
    if (per_class_eff * classes + 2 > edge_count)
      throw ValidationError("make_splits: graph too small to split");
    const std::size_t remainder = edge_count - per_class_eff * classes;
    val_eff = std::min(
        n_val, remainder * n_val / (n_val + n_test));
    val_eff = std::max<std::size_t>(1, val_eff);
    test_eff = std::min(n_test, remainder - val_eff);
    log_info("make_splits: requested sizes infeasible for " +
             std::to_string(edge_count) + " edges; shrunk to " +
             std::to_string(per_class_eff) + " per class, " +
             std::to_string(val_eff) + " val, " + std::to_string(test_eff) +
             " test");
  }

  std::vector<SplitSpec> splits;
  splits.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng(derive_seed(seed, {0x517, r}));
    SplitSpec split;
    split.repeat_index = r;
    std::vector<char> taken(edge_count, 0);
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<std::size_t> pool = by_class[c];
      for (std::size_t i = 0; i < per_class_eff; ++i) {
        const std::size_t j = i + rng.index(pool.size() - i);
        std::swap(pool[i], pool[j]);
        split.train.push_back(pool[i]);
        taken[pool[i]] = 1;
      }
    }
    std::vector<std::size_t> rest;
    rest.reserve(edge_count);
    for (std::size_t e = 0; e < edge_count; ++e)
      if (!taken[e]) rest.push_back(e);
    for (std::size_t i = 0; i < val_eff + test_eff && i < rest.size(); ++i) {
      const std::size_t j = i + rng.index(rest.size() - i);
      std::swap(rest[i], rest[j]);
    }
    split.val.assign(rest.begin(), rest.begin() + static_cast<long>(val_eff));
    split.test.assign(rest.begin() + static_cast<long>(val_eff),
                      rest.begin() + static_cast<long>(val_eff + test_eff));
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

// ---------------------------------------------------------------------------
// Synthetic barbell benchmark: two cliques bridged by a path, three Gaussian
// feature blobs assigned to (clique-1 edges, path edges, clique-2 edges),
// then floor(p * #cross-class-pairs) feature+label pair swaps.
// ---------------------------------------------------------------------------

struct BarbellConfig {
  std::size_t clique_size = 7;
  std::size_t path_nodes = 7;
  std::size_t feature_dim = 200;
  double blob_spread = 1.0;        // isotropic standard deviation
  double center_separation = 10.0; // per-dimension center range, in spreads
  double shuffle_p = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (clique_size < 2) throw ConfigError("barbell.clique_size must be >= 2");
    if (feature_dim < 3) throw ConfigError("barbell.feature_dim must be >= 3");
    if (blob_spread <= 0.0) throw ConfigError("barbell.blob_spread must be > 0");
    if (!(shuffle_p >= 0.0 && shuffle_p <= 1.0))
      throw ConfigError("barbell.shuffle_p must lie in [0,1]");
  }
};

inline DatasetBundle generate_barbell(const BarbellConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.clique_size;
  const std::size_t m = cfg.path_nodes;
  const std::size_t node_count = 2 * c + m;

  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<int> labels;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i + 1; j < c; ++j) {
      edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
      labels.push_back(0);
    }
  {
    // chain from clique-1 node 0 through the path to clique-2 node c
    NodeId prev = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const NodeId p = static_cast<NodeId>(2 * c + i);
      edges.emplace_back(prev, p);
      labels.push_back(1);
      prev = p;
    }
    edges.emplace_back(prev, static_cast<NodeId>(c));
    labels.push_back(1);
  }
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i + 1; j < c; ++j) {
      edges.emplace_back(static_cast<NodeId>(c + i), static_cast<NodeId>(c + j));
      labels.push_back(2);
    }

  // blob centers drawn uniformly in +-(center_separation * blob_spread) per
  // dimension, so every feature column carries class information; samples
  // are isotropic Gaussians around them
  Rng rng(derive_seed(cfg.seed, {0xBA12}));
  Matrix centers(3, cfg.feature_dim);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
      centers.at(k, j) =
          cfg.center_separation * cfg.blob_spread * (2.0 * rng.uniform() - 1.0);
  Matrix edge_features(edges.size(), cfg.feature_dim);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto row = edge_features.row(e);
    const auto center = centers.row(static_cast<std::size_t>(labels[e]));
    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
      row[j] = center[j] + cfg.blob_spread * rng.normal();
  }

  // shuffle: enumerate cross-class pairs on the original labels, sample
  // floor(p * count) of them without replacement, swap features and labels
  if (cfg.shuffle_p > 0.0) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < edges.size(); ++i)
      for (std::size_t j = i + 1; j < edges.size(); ++j)
        if (labels[i] != labels[j]) pairs.emplace_back(i, j);
    const std::size_t swaps = static_cast<std::size_t>(
        std::floor(cfg.shuffle_p * static_cast<double>(pairs.size())));
    for (std::size_t i = 0; i < swaps; ++i) {
      const std::size_t j = i + rng.index(pairs.size() - i);
      std::swap(pairs[i], pairs[j]);
      const auto [a, b] = pairs[i];
      for (std::size_t col = 0; col < cfg.feature_dim; ++col)
        std::swap(edge_features.at(a, col), edge_features.at(b, col));
      std::swap(labels[a], labels[b]);
    }
  }

  DatasetBundle bundle;
  bundle.graph = build_graph(edges, Matrix(node_count, 0), std::move(edge_features));
  bundle.labels = std::move(labels);
  bundle.class_count = 3;
  bundle.has_labels = true;
  std::ostringstream prov;
  prov << "barbell(clique=" << c << ",path=" << m << ",dim=" << cfg.feature_dim
       << ",spread=" << cfg.blob_spread << ",sep=" << cfg.center_separation
       << ",p=" << cfg.shuffle_p << ",seed=" << cfg.seed << ")";
  bundle.provenance = prov.str();
  return bundle;
}

// ---------------------------------------------------------------------------
// Edge labels from node labels: endpoints sharing a class give the edge that
// class, otherwise the extra cross-class index C_n.
// ---------------------------------------------------------------------------

inline std::vector<int> derive_edge_labels(
    const std::vector<int>& node_labels,
    const std::vector<std::pair<NodeId, NodeId>>& edges) {
  int c_n = 0;
  for (std::size_t i = 0; i < node_labels.size(); ++i) {
    if (node_labels[i] < 0)
      throw ValidationError("node " + std::to_string(i) + " is unlabeled");
    c_n = std::max(c_n, node_labels[i] + 1);
  }
  std::vector<int> out;
  out.reserve(edges.size());
  for (const auto& [u, v] : edges) {
    if (u >= node_labels.size() || v >= node_labels.size())
      throw ValidationError("edge references an unlabeled node id");
    out.push_back(node_labels[u] == node_labels[v] ? node_labels[u] : c_n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subgraph restricted to an edge subset (node set unchanged). Used for
// inductive training, where held-out edges are removed from the walk graph.
// ---------------------------------------------------------------------------

struct Subgraph {
  AttributedGraph graph;
  std::vector<std::size_t> source_edge;  // subgraph edge -> bundle edge index
};

inline Subgraph edge_subgraph(const AttributedGraph& graph,
                              const std::vector<std::size_t>& edge_indices) {
  Subgraph sub;
  std::vector<std::pair<NodeId, NodeId>> edges;
  Matrix features(edge_indices.size(), graph.edge_dim());
  edges.reserve(edge_indices.size());
  for (std::size_t i = 0; i < edge_indices.size(); ++i) {
    const EdgeKey& key = graph.edges().at(edge_indices[i]);
    edges.emplace_back(key.u, key.v);
    const auto row = graph.edge_features(edge_indices[i]);
    std::copy(row.begin(), row.end(), features.row(i).begin());
  }
  sub.graph = build_graph(edges, graph.node_feature_matrix(), std::move(features));
  sub.source_edge = edge_indices;
  return sub;
}

}  // namespace attre2vec
