#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "attre2vec/common.hpp"
#include "attre2vec/model.hpp"
#include "attre2vec/parameter_store.hpp"

namespace attre2vec {

// Flat versioned JSON checkpoint: model dimensions, the training config that
// produced it (echoed verbatim), and parameter name -> shape -> row-major
// values. Loading rejects missing, extra, and shape-mismatched parameters.

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  ModelConfig model;
  ParameterStore params;
  nlohmann::json train_config;
};

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return {{"edge_dim", cfg.edge_dim},
          {"node_dim", cfg.node_dim},
          {"embed_dim", cfg.embed_dim},
          {"aggregator", aggregator_name(cfg.aggregator)}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.edge_dim = j.at("edge_dim").get<std::size_t>();
  cfg.node_dim = j.at("node_dim").get<std::size_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.aggregator = parse_aggregator(j.at("aggregator").get<std::string>());
  return cfg;
}

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const ParameterStore& store,
                            const nlohmann::json& train_config) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["model"] = model_config_to_json(cfg);
  j["train_config"] = train_config;
  nlohmann::json params = nlohmann::json::object();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Tensor& t = store.tensor(i);
    params[store.name(i)] = {{"shape", t.shape}, {"values", t.v}};
  }
  j["parameters"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed while writing '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint '" + path + "' is not valid JSON: " +
                          e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw ValidationError("checkpoint '" + path +
                            "' has an unsupported format version");
    Checkpoint ckpt;
    ckpt.model = model_config_from_json(j.at("model"));
    ckpt.train_config = j.value("train_config", nlohmann::json::object());
    ckpt.params = register_parameters(ckpt.model);
    const auto& params = j.at("parameters");
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      const std::string& name = ckpt.params.name(i);
      if (!params.contains(name))
        throw ShapeError("checkpoint '" + path + "' is missing parameter '" +
                         name + "'");
      const auto& entry = params.at(name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      Tensor& t = ckpt.params.tensor(i);
      if (shape != t.shape)
        throw ShapeError("checkpoint '" + path + "': parameter '" + name +
                         "' has mismatched shape");
      const auto values = entry.at("values").get<std::vector<double>>();
      if (values.size() != t.v.size())
        throw ShapeError("checkpoint '" + path + "': parameter '" + name +
                         "' has wrong value count");
      t.v = values;
    }
    if (params.size() != ckpt.params.size())
      throw ShapeError("checkpoint '" + path +
                       "' contains unexpected extra parameters");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint '" + path + "' is malformed: " + e.what());
  }
}

}  // namespace attre2vec
