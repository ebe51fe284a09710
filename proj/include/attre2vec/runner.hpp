#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "attre2vec/checkpoint.hpp"
#include "attre2vec/common.hpp"
#include "attre2vec/data.hpp"
#include "attre2vec/eval.hpp"
#include "attre2vec/model.hpp"
#include "attre2vec/trainer.hpp"

namespace attre2vec {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config access with full field paths in error messages.
// ---------------------------------------------------------------------------

namespace cfgdetail {

inline std::string joined(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline const json& require(const json& j, const std::string& prefix,
                           const std::string& key) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError("config field '" + joined(prefix, key) + "' is missing");
  return j.at(key);
}

template <typename T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + path + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& prefix, const std::string& key,
         T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get_as<T>(j.at(key), joined(prefix, key));
}

template <typename T>
T get_req(const json& j, const std::string& prefix, const std::string& key) {
  return get_as<T>(require(j, prefix, key), joined(prefix, key));
}

}  // namespace cfgdetail

inline json load_config_file(const std::string& path, std::string* raw_text) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (raw_text != nullptr) *raw_text = buf.str();
  try {
    return json::parse(buf.str());
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Section parsers
// ---------------------------------------------------------------------------

inline BarbellConfig barbell_from_json(const json& j, std::uint64_t default_seed) {
  BarbellConfig cfg;
  cfg.clique_size = cfgdetail::get_or<std::size_t>(j, "dataset.generator", "clique_size", cfg.clique_size);
  cfg.path_nodes = cfgdetail::get_or<std::size_t>(j, "dataset.generator", "path_nodes", cfg.path_nodes);
  cfg.feature_dim = cfgdetail::get_or<std::size_t>(j, "dataset.generator", "feature_dim", cfg.feature_dim);
  cfg.blob_spread = cfgdetail::get_or<double>(j, "dataset.generator", "blob_spread", cfg.blob_spread);
  cfg.center_separation = cfgdetail::get_or<double>(j, "dataset.generator", "center_separation", cfg.center_separation);
  cfg.shuffle_p = cfgdetail::get_or<double>(j, "dataset.generator", "shuffle_p", cfg.shuffle_p);
  cfg.seed = cfgdetail::get_or<std::uint64_t>(j, "dataset.generator", "seed", default_seed);
  return cfg;
}

// Rebuild a bundle with per-column standardized edge features.
inline DatasetBundle with_standardized_edge_features(const DatasetBundle& bundle) {
  Matrix feats = bundle.graph.edge_feature_matrix();
  standardize_columns(feats);
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(bundle.graph.edge_count());
  for (const EdgeKey& k : bundle.graph.edges()) edges.emplace_back(k.u, k.v);
  DatasetBundle out;
  out.graph = build_graph(edges, bundle.graph.node_feature_matrix(), std::move(feats));
  out.labels = bundle.labels;
  out.class_count = bundle.class_count;
  out.has_labels = bundle.has_labels;
  out.provenance = bundle.provenance + "+standardized";
  return out;
}

inline DatasetBundle dataset_from_json(const json& root, std::uint64_t base_seed) {
  const json& ds = cfgdetail::require(root, "", "dataset");
  const bool standardize = cfgdetail::get_or<bool>(ds, "dataset", "standardize", true);
  if (ds.contains("generator")) {
    const json& gen = ds.at("generator");
    const std::string type =
        cfgdetail::get_or<std::string>(gen, "dataset.generator", "type", "barbell");
    if (type != "barbell")
      throw ConfigError("config field 'dataset.generator.type' must be 'barbell'");
    DatasetBundle bundle =
        generate_barbell(barbell_from_json(gen, derive_seed(base_seed, {0xDA7A})));
    return standardize ? with_standardized_edge_features(bundle) : bundle;
  }
  const std::string edges = cfgdetail::get_req<std::string>(ds, "dataset", "edges");
  const std::string node_features =
      cfgdetail::get_req<std::string>(ds, "dataset", "node_features");
  const std::string edge_features =
      cfgdetail::get_req<std::string>(ds, "dataset", "edge_features");
  const std::string labels =
      cfgdetail::get_or<std::string>(ds, "dataset", "labels", "");
  return load_dataset(edges, node_features, edge_features, labels, standardize);
}

struct SplitParams {
  std::size_t per_class = 20;
  std::size_t n_val = 1000;
  std::size_t n_test = 1000;
  std::size_t repeats = 10;
  std::size_t index = 0;
  std::uint64_t seed = 0;
};

inline SplitParams split_params_from_json(const json& root, std::uint64_t base_seed) {
  SplitParams p;
  p.seed = derive_seed(base_seed, {0x5137});
  if (!root.contains("split")) return p;
  const json& s = root.at("split");
  p.per_class = cfgdetail::get_or<std::size_t>(s, "split", "per_class", p.per_class);
  p.n_val = cfgdetail::get_or<std::size_t>(s, "split", "n_val", p.n_val);
  p.n_test = cfgdetail::get_or<std::size_t>(s, "split", "n_test", p.n_test);
  p.repeats = cfgdetail::get_or<std::size_t>(s, "split", "repeats", p.repeats);
  p.index = cfgdetail::get_or<std::size_t>(s, "split", "index", p.index);
  p.seed = cfgdetail::get_or<std::uint64_t>(s, "split", "seed", p.seed);
  return p;
}

inline TrainConfig train_config_from_json(const json& root, std::uint64_t base_seed) {
  TrainConfig cfg;
  cfg.seed = derive_seed(base_seed, {0x7124});
  if (root.contains("train")) {
    const json& t = root.at("train");
    cfg.walks_per_endpoint =
        cfgdetail::get_or<std::uint32_t>(t, "train", "k", cfg.walks_per_endpoint);
    cfg.walk_length =
        cfgdetail::get_or<std::uint32_t>(t, "train", "walk_length", cfg.walk_length);
    cfg.embed_dim = cfgdetail::get_or<std::size_t>(t, "train", "embed_dim", cfg.embed_dim);
    cfg.lambda = cfgdetail::get_or<double>(t, "train", "lambda", cfg.lambda);
    cfg.positives_per_edge =
        cfgdetail::get_or<std::size_t>(t, "train", "n_pos", cfg.positives_per_edge);
    cfg.negatives_per_edge =
        cfgdetail::get_or<std::size_t>(t, "train", "n_neg", cfg.negatives_per_edge);
    cfg.optimizer.lr = cfgdetail::get_or<double>(t, "train", "lr", cfg.optimizer.lr);
    cfg.optimizer.weight_decay =
        cfgdetail::get_or<double>(t, "train", "weight_decay", cfg.optimizer.weight_decay);
    cfg.patience = cfgdetail::get_or<std::size_t>(t, "train", "patience", cfg.patience);
    cfg.max_epochs = cfgdetail::get_or<std::size_t>(t, "train", "max_epochs", cfg.max_epochs);
    cfg.batch_size = cfgdetail::get_or<std::size_t>(t, "train", "batch_size", cfg.batch_size);
    cfg.aggregator = parse_aggregator(
        cfgdetail::get_or<std::string>(t, "train", "aggregator", "avg"));
    const std::string mode =
        cfgdetail::get_or<std::string>(t, "train", "mode", "inductive");
    if (mode != "inductive" && mode != "transductive")
      throw ConfigError("config field 'train.mode' must be inductive|transductive");
    cfg.transductive = mode == "transductive";
    cfg.lr_l2_strength =
        cfgdetail::get_or<double>(t, "train", "lr_l2_strength", cfg.lr_l2_strength);
    cfg.seed = cfgdetail::get_or<std::uint64_t>(t, "train", "seed", cfg.seed);
  }
  cfg.validate();
  return cfg;
}

inline json train_config_to_json(const TrainConfig& cfg) {
  return {{"k", cfg.walks_per_endpoint},
          {"walk_length", cfg.walk_length},
          {"embed_dim", cfg.embed_dim},
          {"lambda", cfg.lambda},
          {"n_pos", cfg.positives_per_edge},
          {"n_neg", cfg.negatives_per_edge},
          {"lr", cfg.optimizer.lr},
          {"weight_decay", cfg.optimizer.weight_decay},
          {"patience", cfg.patience},
          {"max_epochs", cfg.max_epochs},
          {"batch_size", cfg.batch_size},
          {"aggregator", aggregator_name(cfg.aggregator)},
          {"mode", cfg.transductive ? "transductive" : "inductive"},
          {"lr_l2_strength", cfg.lr_l2_strength},
          {"seed", cfg.seed}};
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed while writing '" + path + "'");
}

inline void write_report_csv(const std::string& path, const RunReport& report) {
  std::ostringstream out;
  out << "epoch,loss,loss_cos,loss_mse,val_auc\n";
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    const EpochStats& e = report.epochs[i];
    out << (i + 1) << ',' << format_real(e.loss) << ',' << format_real(e.loss_cos)
        << ',' << format_real(e.loss_mse) << ',' << format_real(e.val_auc) << '\n';
  }
  write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// train: fit a model, write checkpoint + per-epoch report + config echo.
// ---------------------------------------------------------------------------

struct TrainOutcome {
  TrainResult result;
  std::string checkpoint_path;
  std::string report_path;
};

inline TrainOutcome run_train(const json& config, const std::string& config_text,
                              const std::string& out_dir,
                              std::optional<std::uint64_t> seed_override) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::uint64_t base_seed =
      seed_override.value_or(cfgdetail::get_or<std::uint64_t>(config, "", "seed", 0));

  DatasetBundle bundle = dataset_from_json(config, base_seed);
  if (!bundle.has_labels)
    throw ConfigError("config field 'dataset.labels' is missing (training needs labels)");
  const SplitParams sp = split_params_from_json(config, base_seed);
  const std::vector<SplitSpec> splits =
      make_splits(bundle, sp.per_class, sp.n_val, sp.n_test, sp.repeats, sp.seed);
  if (sp.index >= splits.size())
    throw ConfigError("config field 'split.index' exceeds split.repeats");
  TrainConfig tc = train_config_from_json(config, base_seed);

  TrainResult result = train(bundle, splits[sp.index], tc);

  const std::string checkpoint_path = out_dir + "/checkpoint.json";
  json extra = train_config_to_json(tc);
  extra["dataset_provenance"] = bundle.provenance;
  extra["split_index"] = sp.index;
  save_checkpoint(checkpoint_path, result.model, result.params, extra);
  result.report.checkpoint_ref = checkpoint_path;

  const std::string report_path = out_dir + "/report.csv";
  write_report_csv(report_path, result.report);
  write_text_file(out_dir + "/config.json", config_text);

  const std::size_t best = result.report.best_epoch;
  std::printf("train: best_epoch=%zu best_val_auc=%s epochs=%zu wall_seconds=%.1f\n",
              best, format_real(result.report.epochs.at(best - 1).val_auc).c_str(),
              result.report.epochs.size(), result.report.wall_seconds);
  return {std::move(result), checkpoint_path, report_path};
}

// ---------------------------------------------------------------------------
// embed: load a checkpoint, infer embeddings for a query edge list (edges
// unseen during training are fine as long as they exist in the dataset
// graph), export CSV.
// ---------------------------------------------------------------------------

inline std::vector<std::size_t> resolve_query_edges(const json& config,
                                                    const DatasetBundle& bundle,
                                                    std::uint64_t base_seed) {
  const json& em = cfgdetail::require(config, "", "embed");
  const std::string which =
      cfgdetail::get_or<std::string>(em, "embed", "edges", "all");
  if (which == "all") {
    std::vector<std::size_t> all(bundle.graph.edge_count());
    for (std::size_t e = 0; e < all.size(); ++e) all[e] = e;
    return all;
  }
  if (which == "train" || which == "val" || which == "test") {
    const SplitParams sp = split_params_from_json(config, base_seed);
    const auto splits =
        make_splits(bundle, sp.per_class, sp.n_val, sp.n_test, sp.repeats, sp.seed);
    if (sp.index >= splits.size())
      throw ConfigError("config field 'split.index' exceeds split.repeats");
    const SplitSpec& s = splits[sp.index];
    return which == "train" ? s.train : which == "val" ? s.val : s.test;
  }
  // else: a CSV file of src,dst pairs
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::vector<int> unused;
  bool has_labels = false;
  load_edge_list(which, &pairs, &unused, &has_labels);
  std::vector<std::size_t> out;
  out.reserve(pairs.size());
  for (const auto& [u, v] : pairs) {
    if (u >= bundle.graph.node_count() || v >= bundle.graph.node_count())
      throw ValidationError("query edge references unknown node id " +
                            std::to_string(std::max(u, v)));
    out.push_back(bundle.graph.edge_index(make_edge_key(u, v)));
  }
  return out;
}

inline std::string run_embed(const json& config, const std::string& out_dir,
                             std::optional<std::uint64_t> seed_override) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::uint64_t base_seed =
      seed_override.value_or(cfgdetail::get_or<std::uint64_t>(config, "", "seed", 0));

  const json& em = cfgdetail::require(config, "", "embed");
  const std::string checkpoint_path =
      cfgdetail::get_req<std::string>(em, "embed", "checkpoint");
  Checkpoint ckpt = load_checkpoint(checkpoint_path);

  DatasetBundle bundle = dataset_from_json(config, base_seed);
  if (bundle.graph.edge_dim() != ckpt.model.edge_dim)
    throw ShapeError("dataset edge feature width " +
                     std::to_string(bundle.graph.edge_dim()) +
                     " does not match checkpoint d_E " +
                     std::to_string(ckpt.model.edge_dim));

  WalkConfig walk_cfg;
  walk_cfg.walks_per_endpoint = cfgdetail::get_or<std::uint32_t>(
      em, "embed", "k",
      static_cast<std::uint32_t>(ckpt.train_config.value("k", 16)));
  walk_cfg.walk_length = cfgdetail::get_or<std::uint32_t>(
      em, "embed", "walk_length",
      static_cast<std::uint32_t>(ckpt.train_config.value("walk_length", 8)));
  walk_cfg.seed = cfgdetail::get_or<std::uint64_t>(
      em, "embed", "seed", derive_seed(base_seed, {0xE3BD}));

  const std::vector<std::size_t> query = resolve_query_edges(config, bundle, base_seed);
  const std::string out_path = out_dir + "/embeddings.csv";
  if (query.empty()) {
    std::ostringstream header;
    header << "src,dst";
    for (std::size_t j = 0; j < ckpt.model.embed_dim; ++j) header << ",e" << j;
    header << ",att_edge,att_u,att_v,label\n";
    write_text_file(out_path, header.str());
    return out_path;
  }

  std::vector<EdgeKey> keys;
  std::vector<int> labels;
  keys.reserve(query.size());
  for (std::size_t e : query) {
    keys.push_back(bundle.graph.edges()[e]);
    labels.push_back(bundle.has_labels ? bundle.labels[e] : -1);
  }
  const std::vector<EdgeEmbedding> embeddings =
      infer_embeddings(bundle.graph, keys, walk_cfg, ckpt.model, ckpt.params);
  export_embeddings(out_path, keys, embeddings, labels);
  std::printf("embed: %zu edges -> %s\n", keys.size(), out_path.c_str());
  return out_path;
}

// ---------------------------------------------------------------------------
// eval: classification AUC (LR trained on the train embeddings, scored on
// the test embeddings) and k-means++ clustering accuracy, per repeat plus an
// aggregate row.
// ---------------------------------------------------------------------------

inline std::string metrics_row(const std::string& dataset, const std::string& split,
                               const std::string& metric, const std::string& mean,
                               const std::string& std_dev) {
  return dataset + "," + split + "," + metric + "," + mean + "," + std_dev + "\n";
}

inline std::string run_eval(const json& config, const std::string& out_dir,
                            std::optional<std::uint64_t> seed_override) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::uint64_t base_seed =
      seed_override.value_or(cfgdetail::get_or<std::uint64_t>(config, "", "seed", 0));
  const json& ev = cfgdetail::require(config, "", "eval");
  const std::string dataset_name =
      cfgdetail::get_or<std::string>(ev, "eval", "name", "embeddings");
  const json& repeats = cfgdetail::require(ev, "eval", "repeats");
  if (!repeats.is_array() || repeats.empty())
    throw ConfigError("config field 'eval.repeats' must be a nonempty array");

  std::string out_text = "dataset,split,metric,mean,std\n";
  std::vector<double> aucs;
  std::vector<double> accs;
  bool any_auc_na = false;
  for (std::size_t r = 0; r < repeats.size(); ++r) {
    const std::string prefix = "eval.repeats[" + std::to_string(r) + "]";
    const std::string train_path =
        cfgdetail::get_req<std::string>(repeats.at(r), prefix, "train_embeddings");
    const std::string test_path =
        cfgdetail::get_req<std::string>(repeats.at(r), prefix, "test_embeddings");
    const EmbeddingFile train_file = read_embeddings(train_path);
    const EmbeddingFile test_file = read_embeddings(test_path);
    if (train_file.embeddings.cols != test_file.embeddings.cols)
      throw ValidationError("embedding widths differ between " + train_path +
                            " and " + test_path);

    int class_count = 0;
    for (int y : train_file.labels) class_count = std::max(class_count, y + 1);
    for (int y : test_file.labels) class_count = std::max(class_count, y + 1);
    if (class_count < 1)
      throw ValidationError(train_path + ": labels missing (all -1)");

    const std::string split_name = "r" + std::to_string(r);
    try {
      LabeledEmbeddingSet train_set{train_file.embeddings, train_file.labels,
                                    class_count};
      const LogisticRegressionModel lr = logistic_regression_fit(train_set);
      const double auc =
          auc_score(lr.predict_proba(test_file.embeddings), test_file.labels);
      aucs.push_back(auc);
      out_text += metrics_row(dataset_name, split_name, "auc", format_real(auc), "0");
    } catch (const ValidationError&) {
      any_auc_na = true;
      out_text += metrics_row(dataset_name, split_name, "auc", "na", "na");
    }
    const KMeansResult km = kmeans_pp(
        test_file.embeddings, static_cast<std::size_t>(class_count),
        derive_seed(base_seed, {0xC123, r}));
    const double acc = clustering_accuracy(km.assignments, test_file.labels);
    accs.push_back(acc);
    out_text += metrics_row(dataset_name, split_name, "clustering_accuracy",
                            format_real(acc), "0");
  }

  const auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  if (!aucs.empty()) {
    const auto [mean, sd] = mean_std(aucs);
    out_text += metrics_row(dataset_name, "aggregate", "auc", format_real(mean),
                            format_real(sd));
  } else if (any_auc_na) {
    out_text += metrics_row(dataset_name, "aggregate", "auc", "na", "na");
  }
  {
    const auto [mean, sd] = mean_std(accs);
    out_text += metrics_row(dataset_name, "aggregate", "clustering_accuracy",
                            format_real(mean), format_real(sd));
  }
  const std::string out_path = out_dir + "/metrics.csv";
  write_text_file(out_path, out_text);
  std::printf("eval: %zu repeats -> %s\n", repeats.size(), out_path.c_str());
  return out_path;
}

// ---------------------------------------------------------------------------
// ablation: the synthetic noise study. For every (p, lambda) grid cell,
// generate a fresh barbell, train transductively for a few epochs, and score
// held-out edges with logistic regression; emit mean and std AUC per cell.
// ---------------------------------------------------------------------------

struct AblationCell {
  double p = 0.0;
  double lambda = 0.0;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  std::size_t repeats = 0;
};

struct AblationParams {
  std::vector<double> p_grid;
  std::vector<double> lambda_grid;
  std::size_t repeats = 10;
  std::size_t epochs = 5;
  BarbellConfig barbell{};
  TrainConfig train{};
  SplitParams split{};
  std::uint64_t seed = 0;
};

inline AblationParams default_ablation_params() {
  AblationParams p;
  for (int i = 0; i <= 10; ++i) p.p_grid.push_back(0.1 * i);
  p.lambda_grid = {0.0, 0.5, 1.0};
  p.train.aggregator = Aggregator::kAvg;
  p.train.transductive = true;
  p.train.batch_size = 2;
  return p;
}

inline double ablation_run_auc(const AblationParams& params, double p,
                               double lambda, std::uint64_t run_seed) {
  BarbellConfig bc = params.barbell;
  bc.shuffle_p = p;
  bc.seed = run_seed;
  const DatasetBundle bundle =
      with_standardized_edge_features(generate_barbell(bc));

  const SplitSpec split = make_splits(bundle, params.split.per_class,
                                      params.split.n_val, params.split.n_test,
                                      1, derive_seed(run_seed, {0x5137}))[0];

  TrainConfig tc = params.train;
  tc.lambda = lambda;
  tc.transductive = true;
  tc.max_epochs = params.epochs;
  tc.seed = derive_seed(run_seed, {0x7124});

  const TrainResult result = train(bundle, split, tc);

  WalkConfig walk_cfg{tc.walks_per_endpoint, tc.walk_length,
                      derive_seed(run_seed, {0xF14A1})};
  ModelConfig model = result.model;
  ParameterStore store = result.params;
  std::vector<EdgeKey> keys;
  std::vector<int> labels;
  for (std::size_t e : split.train) {
    keys.push_back(bundle.graph.edges()[e]);
    labels.push_back(bundle.labels[e]);
  }
  const std::size_t train_n = keys.size();
  for (std::size_t e : split.test) {
    keys.push_back(bundle.graph.edges()[e]);
    labels.push_back(bundle.labels[e]);
  }
  const std::vector<EdgeEmbedding> embs =
      infer_embeddings(bundle.graph, keys, walk_cfg, model, store);

  LabeledEmbeddingSet train_set;
  train_set.class_count = bundle.class_count;
  train_set.features = Matrix(train_n, model.embed_dim);
  Matrix test_features(keys.size() - train_n, model.embed_dim);
  std::vector<int> test_labels;
  for (std::size_t i = 0; i < embs.size(); ++i) {
    if (i < train_n) {
      std::copy(embs[i].h.begin(), embs[i].h.end(), train_set.features.row(i).begin());
      train_set.labels.push_back(labels[i]);
    } else {
      std::copy(embs[i].h.begin(), embs[i].h.end(),
                test_features.row(i - train_n).begin());
      test_labels.push_back(labels[i]);
    }
  }
  const LogisticRegressionModel lr =
      logistic_regression_fit(train_set, params.train.lr_l2_strength);
  return auc_score(lr.predict_proba(test_features), test_labels);
}

inline std::vector<AblationCell> run_ablation_grid(const AblationParams& params) {
  if (params.p_grid.empty() || params.lambda_grid.empty())
    throw ConfigError("ablation grids must be nonempty");
  if (params.repeats == 0) throw ConfigError("ablation.repeats must be >= 1");
  std::vector<AblationCell> cells;
  for (std::size_t ip = 0; ip < params.p_grid.size(); ++ip) {
    for (std::size_t il = 0; il < params.lambda_grid.size(); ++il) {
      std::vector<double> aucs;
      aucs.reserve(params.repeats);
      for (std::size_t r = 0; r < params.repeats; ++r) {
        const std::uint64_t run_seed =
            derive_seed(params.seed, {0xAB1A, ip, il, r});
        aucs.push_back(ablation_run_auc(params, params.p_grid[ip],
                                        params.lambda_grid[il], run_seed));
      }
      AblationCell cell;
      cell.p = params.p_grid[ip];
      cell.lambda = params.lambda_grid[il];
      cell.repeats = params.repeats;
      double mean = 0.0;
      for (double a : aucs) mean += a;
      mean /= static_cast<double>(aucs.size());
      double var = 0.0;
      for (double a : aucs) var += (a - mean) * (a - mean);
      var /= static_cast<double>(aucs.size());
      cell.auc_mean = mean;
      cell.auc_std = std::sqrt(var);
      cells.push_back(cell);
      log_info("ablation p=" + std::to_string(cell.p) +
               " lambda=" + std::to_string(cell.lambda) + " auc=" +
               std::to_string(cell.auc_mean) + " +- " + std::to_string(cell.auc_std));
    }
  }
  return cells;
}

inline AblationParams ablation_params_from_json(const json& config,
                                                std::uint64_t base_seed) {
  AblationParams params = default_ablation_params();
  params.seed = base_seed;
  if (config.contains("dataset") && config.at("dataset").contains("generator"))
    params.barbell = barbell_from_json(config.at("dataset").at("generator"),
                                       derive_seed(base_seed, {0xDA7A}));
  params.train = train_config_from_json(config, base_seed);
  params.train.transductive = true;
  if (!config.contains("train") || !config.at("train").contains("batch_size"))
    params.train.batch_size = 2;
  params.split = split_params_from_json(config, base_seed);
  if (config.contains("ablation")) {
    const json& ab = config.at("ablation");
    if (ab.contains("p_grid"))
      params.p_grid = cfgdetail::get_as<std::vector<double>>(ab.at("p_grid"),
                                                             "ablation.p_grid");
    if (ab.contains("lambda_grid"))
      params.lambda_grid = cfgdetail::get_as<std::vector<double>>(
          ab.at("lambda_grid"), "ablation.lambda_grid");
    params.repeats =
        cfgdetail::get_or<std::size_t>(ab, "ablation", "repeats", params.repeats);
    params.epochs =
        cfgdetail::get_or<std::size_t>(ab, "ablation", "epochs", params.epochs);
  }
  return params;
}

inline std::string run_ablation(const json& config, const std::string& out_dir,
                                std::optional<std::uint64_t> seed_override) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::uint64_t base_seed =
      seed_override.value_or(cfgdetail::get_or<std::uint64_t>(config, "", "seed", 0));
  const AblationParams params = ablation_params_from_json(config, base_seed);
  const std::vector<AblationCell> cells = run_ablation_grid(params);
  std::string out_text = "p,lambda,auc_mean,auc_std,repeats\n";
  for (const AblationCell& c : cells) {
    out_text += format_real(c.p) + "," + format_real(c.lambda) + "," +
                format_real(c.auc_mean) + "," + format_real(c.auc_std) + "," +
                std::to_string(c.repeats) + "\n";
  }
  const std::string out_path = out_dir + "/ablation.csv";
  write_text_file(out_path, out_text);
  std::printf("ablation: %zu cells -> %s\n", cells.size(), out_path.c_str());
  return out_path;
}

}  // namespace attre2vec
