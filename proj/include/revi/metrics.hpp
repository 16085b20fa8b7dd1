#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "revi/synth.hpp"

namespace revi {

// Threshold grid for best-F1: 256 uniform points i/256, i = 1..256. The
// grid contains 0.5, so best F1 can never fall below the fixed-threshold
// score.
constexpr int kF1Thresholds = 256;
double f1_threshold(int i);  // i in [0, kF1Thresholds)

struct BestF1 {
  double f1 = 0.0;
  double threshold = 0.0;
};

// Pixel F1 at a fixed threshold (prediction positive iff p >= t). An image
// with empty ground truth scores 1 when the prediction is empty too, else 0.
double f1_at(std::span<const double> probs, std::span<const double> gt, double threshold);

// F1 at every grid threshold in one histogram sweep.
std::vector<double> f1_curve(std::span<const double> probs, std::span<const double> gt);

// Max F1 over the threshold grid.
BestF1 best_f1(std::span<const double> probs, std::span<const double> gt);

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked
// correctly, ties counted 1/2. Throws on single-class ground truth.
double auc(std::span<const double> probs, std::span<const double> gt);

struct EvalReport {
  double best_f1 = 0.0;         // macro mean of per-image best F1
  double f1_at_half = 0.0;      // macro mean of per-image F1 at t = 0.5
  double auc = 0.0;             // macro mean over images with both classes
  double threshold_at_best = 0.0;  // grid threshold maximizing macro F1
  int images = 0;
  int auc_images = 0;           // images that contributed to the AUC mean
  std::map<std::string, double> per_kind_f1;
  // distortion name -> best F1 under that distortion
  std::vector<std::pair<std::string, double>> distortion_grid;

  std::string to_tsv() const;
  std::string to_summary_line() const;  // "metric=value" pairs
};

struct EvalOptions {
  bool pooled = false;  // pool pixels across images instead of macro-average
  std::vector<Distortion> distortions;
  uint64_t noise_seed = 0;  // seeds the noise distortion per image
};

// The predictor maps a [3,H,W] unit-range image to a per-pixel probability
// map of the same spatial size.
using Predictor = std::function<std::vector<double>(const std::vector<double>& image, int size)>;

EvalReport evaluate(const Predictor& predict, const std::vector<LoadedSample>& dataset,
                    const EvalOptions& opts = {});

}  // namespace revi
