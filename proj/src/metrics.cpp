#include "revi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "revi/rng.hpp"
#include "revi/tensor.hpp"

namespace revi {

double f1_threshold(int i) { return static_cast<double>(i + 1) / kF1Thresholds; }

namespace {

struct Counts {
  long tp = 0, fp = 0, fn = 0;
};

double f1_from_counts(const Counts& c, bool gt_empty, bool pred_empty) {
  if (gt_empty) return pred_empty ? 1.0 : 0.0;
  if (c.tp == 0) return 0.0;
  return 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn);
}

}  // namespace

double f1_at(std::span<const double> probs, std::span<const double> gt, double threshold) {
  Counts c;
  bool gt_empty = true, pred_empty = true;
  for (size_t i = 0; i < probs.size(); ++i) {
    bool p = probs[i] >= threshold;
    bool t = gt[i] != 0.0;
    if (t) gt_empty = false;
    if (p) pred_empty = false;
    if (p && t)
      ++c.tp;
    else if (p && !t)
      ++c.fp;
    else if (!p && t)
      ++c.fn;
  }
  return f1_from_counts(c, gt_empty, pred_empty);
}

std::vector<double> f1_curve(std::span<const double> probs, std::span<const double> gt) {
  // Histogram sweep: bin b collects p in [b/256, (b+1)/256). A pixel is
  // predicted positive at threshold (i+1)/256 exactly when its bin >= i+1,
  // since multiplying a double by 256 is exact.
  long pos_total = 0;
  for (double t : gt)
    if (t != 0.0) ++pos_total;
  std::vector<long> pos_bins(kF1Thresholds + 1, 0), all_bins(kF1Thresholds + 1, 0);
  for (size_t i = 0; i < probs.size(); ++i) {
    int b = std::clamp(static_cast<int>(probs[i] * kF1Thresholds), 0, kF1Thresholds);
    ++all_bins[static_cast<size_t>(b)];
    if (gt[i] != 0.0) ++pos_bins[static_cast<size_t>(b)];
  }
  std::vector<long> pred_at(kF1Thresholds + 1), tp_at(kF1Thresholds + 1);
  long pred = 0, tp = 0;
  for (int b = kF1Thresholds; b >= 0; --b) {
    pred += all_bins[static_cast<size_t>(b)];
    tp += pos_bins[static_cast<size_t>(b)];
    pred_at[static_cast<size_t>(b)] = pred;
    tp_at[static_cast<size_t>(b)] = tp;
  }
  std::vector<double> curve(kF1Thresholds);
  for (int i = 0; i < kF1Thresholds; ++i) {
    Counts c;
    c.tp = tp_at[static_cast<size_t>(i + 1)];
    c.fp = pred_at[static_cast<size_t>(i + 1)] - c.tp;
    c.fn = pos_total - c.tp;
    curve[static_cast<size_t>(i)] =
        f1_from_counts(c, pos_total == 0, pred_at[static_cast<size_t>(i + 1)] == 0);
  }
  return curve;
}

BestF1 best_f1(std::span<const double> probs, std::span<const double> gt) {
  std::vector<double> curve = f1_curve(probs, gt);
  BestF1 best;
  best.threshold = f1_threshold(0);
  for (int i = 0; i < kF1Thresholds; ++i)
    if (curve[static_cast<size_t>(i)] > best.f1) {
      best.f1 = curve[static_cast<size_t>(i)];
      best.threshold = f1_threshold(i);
    }
  return best;
}

double auc(std::span<const double> probs, std::span<const double> gt) {
  long pos = 0, negs = 0;
  for (double t : gt) (t != 0.0 ? pos : negs)++;
  if (pos == 0 || negs == 0)
    throw NumericalError("auc: ground truth contains a single class");
  // rank-sum formulation with averaged ranks for ties
  std::vector<int> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return probs[static_cast<size_t>(a)] < probs[static_cast<size_t>(b)]; });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() &&
           probs[static_cast<size_t>(idx[j + 1])] == probs[static_cast<size_t>(idx[i])])
      ++j;
    double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (gt[static_cast<size_t>(idx[k])] != 0.0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * (static_cast<double>(pos) + 1.0);
  return u / (static_cast<double>(pos) * static_cast<double>(negs));
}

std::string EvalReport::to_tsv() const {
  std::ostringstream os;
  os << "metric\tvalue\n";
  os << "best_f1\t" << best_f1 << "\n";
  os << "f1_at_0.5\t" << f1_at_half << "\n";
  os << "auc\t" << auc << "\n";
  os << "threshold_at_best\t" << threshold_at_best << "\n";
  os << "images\t" << images << "\n";
  os << "auc_images\t" << auc_images << "\n";
  for (const auto& [kind, f1] : per_kind_f1) os << "f1[" << kind << "]\t" << f1 << "\n";
  for (const auto& [name, f1] : distortion_grid)
    os << "best_f1[" << name << "]\t" << f1 << "\n";
  return os.str();
}

std::string EvalReport::to_summary_line() const {
  std::ostringstream os;
  os << "best_f1=" << best_f1 << " f1_at_0.5=" << f1_at_half << " auc=" << auc
     << " threshold_at_best=" << threshold_at_best << " images=" << images;
  for (const auto& [name, f1] : distortion_grid) os << " best_f1[" << name << "]=" << f1;
  return os.str();
}

namespace {

struct MacroAccum {
  double f1_sum = 0.0, f1_half_sum = 0.0, auc_sum = 0.0;
  int n = 0, auc_n = 0;
  std::vector<double> macro_f1_by_threshold = std::vector<double>(kF1Thresholds, 0.0);
  std::map<std::string, std::pair<double, int>> by_kind;
};

}  // namespace

EvalReport evaluate(const Predictor& predict, const std::vector<LoadedSample>& dataset,
                    const EvalOptions& opts) {
  if (dataset.empty()) throw NumericalError("evaluate: empty dataset");

  auto run_pass = [&](const Distortion* dist) {
    MacroAccum acc;
    std::vector<double> pooled_probs, pooled_gt;
    for (size_t s = 0; s < dataset.size(); ++s) {
      const auto& sample = dataset[s];
      int size = sample.image.width;
      std::vector<double> img = to_unit(sample.image);
      if (dist)
        img = distort(img, size, *dist,
                      substream(opts.noise_seed, "eval-noise", s).next_u64());
      std::vector<double> probs = predict(img, size);
      std::vector<double> gt = u8_to_mask(sample.mask);
      if (opts.pooled) {
        pooled_probs.insert(pooled_probs.end(), probs.begin(), probs.end());
        pooled_gt.insert(pooled_gt.end(), gt.begin(), gt.end());
        continue;
      }
      std::vector<double> curve = f1_curve(probs, gt);
      BestF1 bf;
      bf.threshold = f1_threshold(0);
      for (int i = 0; i < kF1Thresholds; ++i) {
        acc.macro_f1_by_threshold[static_cast<size_t>(i)] += curve[static_cast<size_t>(i)];
        if (curve[static_cast<size_t>(i)] > bf.f1) {
          bf.f1 = curve[static_cast<size_t>(i)];
          bf.threshold = f1_threshold(i);
        }
      }
      acc.f1_sum += bf.f1;
      acc.f1_half_sum += f1_at(probs, gt, 0.5);
      bool has_pos = false, has_neg = false;
      for (double t : gt) (t != 0.0 ? has_pos : has_neg) = true;
      if (has_pos && has_neg) {
        acc.auc_sum += auc(probs, gt);
        ++acc.auc_n;
      }
      auto& kindslot = acc.by_kind[manip_kind_name(sample.kind)];
      kindslot.first += bf.f1;
      kindslot.second += 1;
      ++acc.n;
    }
    EvalReport rep;
    if (opts.pooled) {
      BestF1 bf = best_f1(pooled_probs, pooled_gt);
      rep.best_f1 = bf.f1;
      rep.threshold_at_best = bf.threshold;
      rep.f1_at_half = f1_at(pooled_probs, pooled_gt, 0.5);
      rep.auc = auc(pooled_probs, pooled_gt);
      rep.images = static_cast<int>(dataset.size());
      rep.auc_images = rep.images;
      return rep;
    }
    rep.images = acc.n;
    rep.auc_images = acc.auc_n;
    rep.best_f1 = acc.f1_sum / acc.n;
    rep.f1_at_half = acc.f1_half_sum / acc.n;
    rep.auc = acc.auc_n ? acc.auc_sum / acc.auc_n : 0.0;
    int best_t = 0;
    for (int i = 1; i < kF1Thresholds; ++i)
      if (acc.macro_f1_by_threshold[static_cast<size_t>(i)] >
          acc.macro_f1_by_threshold[static_cast<size_t>(best_t)])
        best_t = i;
    rep.threshold_at_best = f1_threshold(best_t);
    for (const auto& [kind, slot] : acc.by_kind)
      rep.per_kind_f1[kind] = slot.first / slot.second;
    return rep;
  };

  EvalReport rep = run_pass(nullptr);
  for (const auto& d : opts.distortions) {
    EvalReport dr = run_pass(&d);
    rep.distortion_grid.emplace_back(distortion_name(d), dr.best_f1);
  }
  return rep;
}

}  // namespace revi
