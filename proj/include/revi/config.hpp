#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "revi/backbone.hpp"
#include "revi/losses.hpp"
#include "revi/optim.hpp"

namespace revi {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full run configuration. The on-disk format is plain text, one
// "section.key = value" per line, '#' comments; unknown keys are rejected.
// Every command writes the fully resolved config next to its outputs.
struct RunConfig {
  uint64_t seed = 1;

  BackboneConfig backbone;

  // adapter
  AdapterKind adapter_kind = AdapterKind::revi;
  Placement placement = Placement::encoder;
  int lora_rank = 4;
  double rho_init = 0.1;
  double alpha_init = 0.0;

  LossConfig loss;
  OptimConfig optim;

  // pretraining (proxy segmentation task)
  double pretrain_lr = 3e-4;
  int pretrain_epochs = 5;

  // data counts
  int train_authentic = 500, train_copy_move = 500, train_splice = 500,
      train_removal = 500;
  int test_authentic = 125, test_copy_move = 125, test_splice = 125, test_removal = 125;
  int proxy_train = 1000, proxy_val = 200;

  int log_every = 50;
  bool eval_pooled = false;

  std::string dataset_dir = "data";

  std::string serialize() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void write_resolved_config(const std::filesystem::path& dir, const RunConfig& cfg);

}  // namespace revi
