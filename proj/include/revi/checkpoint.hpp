#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "revi/optim.hpp"
#include "revi/tensor.hpp"

namespace revi {

// Binary checkpoint: versioned named parameter list with little-endian
// 64-bit float payloads plus the frozen mask; optimizer moments optional.
// load(save(m)) reproduces every parameter bit-exactly.

struct CheckpointEntry {
  std::vector<int> shape;
  std::vector<double> data;
  bool frozen = false;
};

struct Checkpoint {
  std::map<std::string, CheckpointEntry> params;
  std::optional<std::vector<AdamW::Slot>> moments;
  int optimizer_steps = 0;
};

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedParam>& params,
                     const AdamW* optimizer = nullptr);

Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into the model parameters (bitwise). With
// allow_missing, parameters absent from the file keep their initialization
// (used when loading a backbone checkpoint into an adapted model); file
// entries that match no parameter are always an error. apply_frozen_mask
// restores the stored trainability flags; leave it off when the caller has
// already frozen the model (adapter training on a pretrained backbone).
void apply_checkpoint(const Checkpoint& ckpt, std::vector<NamedParam>& params,
                      bool allow_missing = false, bool apply_frozen_mask = true);

void load_checkpoint(const std::filesystem::path& path, std::vector<NamedParam>& params,
                     bool allow_missing = false, bool apply_frozen_mask = true);

}  // namespace revi
