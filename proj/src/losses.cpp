#include "revi/losses.hpp"

#include <algorithm>
#include <cmath>

namespace revi {

namespace {

void check_binary(const Tensor& mask, const char* op) {
  for (double v : mask.data())
    if (v != 0.0 && v != 1.0)
      throw ShapeError(std::string(op) + ": mask must be {0,1}-valued");
}

// Shared hard-morphology core; comparator picks dilation (max) or erosion (min).
Tensor hard_morph(const Tensor& mask, bool take_max) {
  if (mask.shape().size() != 3 || mask.dim(0) != 1)
    throw ShapeError("morphology expects a [1,H,W] mask");
  int h = mask.dim(1), w = mask.dim(2);
  auto src = mask.data();
  std::vector<double> out(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double best = take_max ? 0.0 : 1.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int sy = std::clamp(y + dy, 0, h - 1);
          int sx = std::clamp(x + dx, 0, w - 1);
          double v = src[static_cast<size_t>(sy) * w + sx];
          best = take_max ? std::max(best, v) : std::min(best, v);
        }
      out[static_cast<size_t>(y) * w + x] = best;
    }
  return Tensor::from_data({1, h, w}, std::move(out));
}

}  // namespace

Tensor dilate3x3(const Tensor& mask) {
  check_binary(mask, "dilate3x3");
  return hard_morph(mask, true);
}

Tensor erode3x3(const Tensor& mask) {
  check_binary(mask, "erode3x3");
  return hard_morph(mask, false);
}

Tensor edge_mask(const Tensor& mask) {
  check_binary(mask, "edge_mask");
  Tensor d = hard_morph(mask, true);
  Tensor e = hard_morph(mask, false);
  auto dd = d.data();
  auto ee = e.data();
  std::vector<double> out(dd.size());
  for (size_t i = 0; i < dd.size(); ++i) out[i] = std::fabs(dd[i] - ee[i]);
  return Tensor::from_data(mask.shape(), std::move(out));
}

Tensor bce_loss(const Tensor& logits, const Tensor& target, double eps) {
  check_binary(target, "bce_loss");
  return bce_with_logits(logits, target, eps);
}

Tensor edge_loss(const Tensor& pred_logits, const Tensor& gt_mask, double eps) {
  if (pred_logits.shape() != gt_mask.shape())
    throw ShapeError("edge_loss: shape mismatch " + shape_str(pred_logits.shape()) +
                     " vs " + shape_str(gt_mask.shape()));
  Tensor target_edge = edge_mask(gt_mask);
  Tensor prob = sigmoid(pred_logits);
  Tensor soft_edge = sub(maxpool3x3(prob), minpool3x3(prob));
  return bce_probs(soft_edge, target_edge, eps);
}

Tensor total_loss(const Tensor& pred_logits, const Tensor& gt_mask, const LossConfig& cfg) {
  Tensor l = bce_loss(pred_logits, gt_mask, cfg.bce_epsilon);
  if (cfg.lambda_edge == 0.0) return l;
  return add(l, mul_scalar(edge_loss(pred_logits, gt_mask, cfg.bce_epsilon),
                           cfg.lambda_edge));
}

}  // namespace revi
