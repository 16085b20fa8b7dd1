#pragma once

#include <functional>
#include <string>
#include <vector>

#include "revi/tensor.hpp"

namespace revi {

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
  int coords_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool pass(double tol) const { return max_rel_err < tol; }
};

struct GradCheckOptions {
  double eps = 1e-5;
  int max_coords_per_param = 24;  // central differences are 2 forwards each
  uint64_t seed = 7;
};

// Compares the analytic gradient of the scalar-valued closure against
// central differences on a sampled subset of coordinates per parameter.
// The error metric is |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<NamedParam>& params,
                           const GradCheckOptions& opts = {});

struct GradCheckCase {
  std::string name;
  double tol;
  std::function<GradCheckReport()> run;
};

// Every differentiable operation plus the composed adapter/model chains.
std::vector<GradCheckCase> gradcheck_registry();

}  // namespace revi
