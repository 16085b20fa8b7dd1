#pragma once

#include <vector>

#include "revi/tensor.hpp"

namespace revi {

struct OptimConfig {
  double lr_init = 1e-4;
  double lr_min = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int total_steps = 2000;
};

// Cosine annealing from lr_init down to lr_min over total_steps.
double cosine_lr(int step, const OptimConfig& cfg);

// AdamW with decoupled weight decay. Frozen parameters and parameters
// without a gradient are untouched. Throws NumericalError on NaN/Inf
// gradients so a diverged run aborts instead of silently corrupting state.
class AdamW {
 public:
  explicit AdamW(const OptimConfig& cfg) : cfg_(cfg) {}

  void step(std::vector<NamedParam>& params, double lr);
  int steps_taken() const { return t_; }

  struct Slot {
    std::vector<double> m, v;
  };
  // Exposed for checkpointing optimizer moments.
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  void set_steps_taken(int t) { t_ = t; }

 private:
  OptimConfig cfg_;
  std::vector<Slot> slots_;
  int t_ = 0;
};

}  // namespace revi
