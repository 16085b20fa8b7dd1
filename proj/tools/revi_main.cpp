// revi: synthetic-benchmark trainer and evaluator for RPCA-inspired
// adapters on a frozen toy vision backbone.
//
// Subcommands: gen-data, pretrain, train, eval, decompose, census, gradcheck.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "revi/cli.hpp"
#include "revi/image_io.hpp"

namespace fs = std::filesystem;
using namespace revi;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "run";
  uint64_t seed = 0;
  bool seed_set = false;
  std::string placement, adapter, distorts_unused;
  int lora_rank = -1;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.placement.empty()) cfg.placement = placement_from(args.placement);
  if (!args.adapter.empty()) cfg.adapter_kind = adapter_kind_from(args.adapter);
  if (args.lora_rank >= 0) cfg.lora_rank = args.lora_rank;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_model_flags = true) {
  cmd->add_option("--config", args.config_path, "run configuration file");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
  if (with_model_flags) {
    cmd->add_option("--placement", args.placement, "encoder|decoder|both");
    cmd->add_option("--adapter", args.adapter, "revi|conv-equal|none");
    cmd->add_option("--lora-rank", args.lora_rank, "LoRA rank (0 disables)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RPCA-inspired adapter training on a frozen toy backbone"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_common(gen, args, false);

  auto* pretrain = app.add_subcommand("pretrain", "proxy-task pretraining of the backbone");
  std::string data_dir = "data";
  pretrain->add_option("--data", data_dir, "dataset directory");
  add_common(pretrain, args, false);

  auto* train = app.add_subcommand("train", "train adapters on a frozen backbone");
  std::string checkpoint;
  train->add_option("--data", data_dir, "dataset directory");
  train->add_option("--checkpoint", checkpoint, "pretrained backbone checkpoint")
      ->required();
  add_common(train, args);

  auto* eval = app.add_subcommand("eval", "evaluate a trained checkpoint");
  std::vector<std::string> distort_args;
  eval->add_option("--data", data_dir, "dataset directory");
  eval->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  eval->add_option("--distort", distort_args, "distortion KIND:PARAM (repeatable)");
  add_common(eval, args);

  auto* decompose = app.add_subcommand("decompose", "low-rank + sparse decomposition of a PGM");
  std::string input_pgm;
  bool classical = false, learned = false;
  int rpca_iters = 500;
  decompose->add_option("input", input_pgm, "input PGM image")->required();
  decompose->add_flag("--classical", classical, "run the classical solver");
  decompose->add_flag("--learned", learned, "dump adapter feature decompositions");
  decompose->add_option("--checkpoint", checkpoint, "checkpoint for --learned");
  decompose->add_option("--max-iter", rpca_iters, "solver iteration cap");
  add_common(decompose, args);

  auto* census = app.add_subcommand("census", "print the parameter census");
  add_common(census, args);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every op");
  add_common(gradcheck, args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      RunConfig cfg = resolve_config(args);
      cmd_gen_data(cfg, args.out_dir);
      std::cout << "dataset written to " << args.out_dir << "\n";
    } else if (*pretrain) {
      RunConfig cfg = resolve_config(args);
      TrainStats st = cmd_pretrain(cfg, data_dir, args.out_dir);
      std::cout << "pretrain: steps " << st.steps << " loss " << st.first_loss << " -> "
                << st.last_loss << " val_iou " << st.val_iou << "\n";
    } else if (*train) {
      RunConfig cfg = resolve_config(args);
      TrainStats st = cmd_train(cfg, data_dir, checkpoint, args.out_dir);
      std::cout << "train: steps " << st.steps << " loss " << st.first_loss << " -> "
                << st.last_loss << "\n";
    } else if (*eval) {
      RunConfig cfg = resolve_config(args);
      std::vector<Distortion> distortions;
      for (const auto& d : distort_args) distortions.push_back(parse_distortion(d));
      EvalReport rep = cmd_eval(cfg, checkpoint, data_dir, distortions, args.out_dir);
      std::cout << rep.to_summary_line() << "\n";
    } else if (*decompose) {
      RunConfig cfg = resolve_config(args);
      if (classical == learned)
        throw ConfigError("decompose: pass exactly one of --classical / --learned");
      if (classical) {
        cmd_decompose_classical(input_pgm, args.out_dir, rpca_iters);
      } else {
        if (checkpoint.empty()) throw ConfigError("decompose --learned needs --checkpoint");
        cmd_decompose_learned(cfg, checkpoint, input_pgm, args.out_dir);
      }
      std::cout << "decomposition written to " << args.out_dir << "\n";
    } else if (*census) {
      RunConfig cfg = resolve_config(args);
      std::cout << cmd_census(cfg);
    } else if (*gradcheck) {
      std::string report;
      bool ok = cmd_gradcheck(report);
      std::cout << report;
      return ok ? kExitOk : kExitNumerical;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
