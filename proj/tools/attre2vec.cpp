#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "attre2vec/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitIo = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "JSON config file")->required();
  cmd->add_option("--out", args->out_dir, "output directory");
  cmd->add_option("--seed", [args](const CLI::results_t& res) {
    try {
      std::size_t consumed = 0;
      args->seed = std::stoull(res.front(), &consumed);
      return consumed == res.front().size();
    } catch (const std::exception&) {
      return false;
    }
  }, "seed override (takes precedence over the config)");
}

int dispatch(const std::string& command, const CommonArgs& args) {
  std::string config_text;
  const attre2vec::json config =
      attre2vec::load_config_file(args.config_path, &config_text);
  if (command == "train") {
    attre2vec::run_train(config, config_text, args.out_dir, args.seed);
  } else if (command == "embed") {
    attre2vec::run_embed(config, args.out_dir, args.seed);
  } else if (command == "eval") {
    attre2vec::run_eval(config, args.out_dir, args.seed);
  } else if (command == "ablation") {
    attre2vec::run_ablation(config, args.out_dir, args.seed);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attre2vec: unsupervised attributed edge embeddings"};
  app.require_subcommand(1);

  CommonArgs train_args, embed_args, eval_args, ablation_args;
  add_common(app.add_subcommand("train", "train a model and write checkpoint + report"),
             &train_args);
  add_common(app.add_subcommand("embed", "infer edge embeddings from a checkpoint"),
             &embed_args);
  add_common(app.add_subcommand("eval", "classification AUC and clustering accuracy"),
             &eval_args);
  add_common(app.add_subcommand("ablation", "noise-vs-lambda grid on the synthetic barbell"),
             &ablation_args);

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  const CommonArgs& args = command == "train"   ? train_args
                           : command == "embed" ? embed_args
                           : command == "eval"  ? eval_args
                                                : ablation_args;
  try {
    return dispatch(command, args);
  } catch (const attre2vec::NumericFault& e) {
    std::fprintf(stderr, "numeric fault: %s\n", e.what());
    return kExitNumeric;
  } catch (const attre2vec::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const attre2vec::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
