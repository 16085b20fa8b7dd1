#include "revi/optim.hpp"

#include <cmath>

namespace revi {

double cosine_lr(int step, const OptimConfig& cfg) {
  if (step < 0 || step > cfg.total_steps)
    throw NumericalError("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                         std::to_string(cfg.total_steps) + "]");
  double phase = 3.14159265358979323846 * static_cast<double>(step) / cfg.total_steps;
  return cfg.lr_min + 0.5 * (cfg.lr_init - cfg.lr_min) * (1.0 + std::cos(phase));
}

void AdamW::step(std::vector<NamedParam>& params, double lr) {
  if (slots_.empty()) slots_.resize(params.size());
  if (slots_.size() != params.size())
    throw NumericalError("AdamW: parameter list changed size mid-run");
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (size_t p = 0; p < params.size(); ++p) {
    auto& param = params[p];
    if (!param.tensor.requires_grad()) continue;
    const auto* g = param.tensor.grad();
    if (!g) continue;
    auto& slot = slots_[p];
    auto data = param.tensor.mutable_data();
    if (slot.m.empty()) {
      slot.m.assign(data.size(), 0.0);
      slot.v.assign(data.size(), 0.0);
    }
    for (size_t i = 0; i < data.size(); ++i) {
      double gi = (*g)[i];
      if (!std::isfinite(gi))
        throw NumericalError("AdamW: non-finite gradient in parameter " + param.name);
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * gi;
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = slot.m[i] / bc1;
      double vhat = slot.v[i] / bc2;
      data[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * data[i]);
    }
  }
}

}  // namespace revi
