#include "revi/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "revi/rng.hpp"

namespace revi {

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<NamedParam>& params,
                           const GradCheckOptions& opts) {
  for (const auto& p : params) p.tensor.zero_grad();
  Tensor loss = f();
  backward(loss);

  SeedStream rng(opts.seed);
  GradCheckReport report;
  for (const auto& p : params) {
    GradCheckEntry entry;
    entry.param = p.name;
    const auto* g = p.tensor.grad();
    if (!p.tensor.requires_grad()) {
      report.entries.push_back(entry);
      continue;
    }
    if (!g) throw AutodiffError("grad_check: no gradient on parameter " + p.name);

    Tensor t = p.tensor;  // shared handle; we perturb in place and restore
    int n = t.numel();
    std::vector<int> coords;
    if (n <= opts.max_coords_per_param) {
      coords.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      for (int i = 0; i < opts.max_coords_per_param; ++i)
        coords.push_back(rng.uniform_int(0, n - 1));
    }
    auto data = t.mutable_data();
    for (int c : coords) {
      double saved = data[static_cast<size_t>(c)];
      data[static_cast<size_t>(c)] = saved + opts.eps;
      double up = f().item();
      data[static_cast<size_t>(c)] = saved - opts.eps;
      double down = f().item();
      data[static_cast<size_t>(c)] = saved;
      double numeric = (up - down) / (2.0 * opts.eps);
      double analytic = (*g)[static_cast<size_t>(c)];
      double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
      entry.max_rel_err = std::max(entry.max_rel_err, std::fabs(analytic - numeric) / denom);
      ++entry.coords_checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace revi
