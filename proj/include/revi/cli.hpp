#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "revi/backbone.hpp"
#include "revi/config.hpp"
#include "revi/metrics.hpp"

namespace revi {

// Exit codes shared by the binary and the command implementations.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

struct TrainStats {
  double first_loss = 0.0;
  double last_loss = 0.0;
  int steps = 0;
  double val_iou = 0.0;  // pretraining only
};

// Generates proxy_train/proxy_val/train/test splits under out_dir.
void cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Proxy-task pretraining of the full backbone; writes checkpoint.bin,
// train.log and config.resolved into out_dir. epochs == 0 just saves the
// random initialization (used by the semantic-prior ablation).
TrainStats cmd_pretrain(const RunConfig& cfg, const std::filesystem::path& data_dir,
                        const std::filesystem::path& out_dir);

// Freezes the pretrained backbone, attaches adapters per config and trains
// them; writes checkpoint.bin, census.txt, train.log and config.resolved.
TrainStats cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
                     const std::filesystem::path& pretrain_checkpoint,
                     const std::filesystem::path& out_dir);

// Rebuilds the model from config + checkpoint and evaluates on a split.
EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                    const std::filesystem::path& data_dir,
                    const std::vector<Distortion>& distortions,
                    const std::filesystem::path& out_dir);

// Classical path: RPCA on a PGM image, writes B.pgm / O.pgm. Learned path:
// runs the adapted model and writes per-site channel-averaged B/O maps.
void cmd_decompose_classical(const std::filesystem::path& input_pgm,
                             const std::filesystem::path& out_dir, int max_iter);
void cmd_decompose_learned(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                           const std::filesystem::path& input_pgm,
                           const std::filesystem::path& out_dir);

// Prints the parameter census for the configured model.
std::string cmd_census(const RunConfig& cfg);

// Runs the gradient-check registry; returns true when everything passes.
bool cmd_gradcheck(std::string& report_out);

// Shared helpers.
AdaptedModel build_model(const RunConfig& cfg, SeedStream& rng);
Predictor make_predictor(const AdaptedModel& model);

}  // namespace revi
