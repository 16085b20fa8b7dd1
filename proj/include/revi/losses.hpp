#pragma once

#include "revi/tensor.hpp"

namespace revi {

struct LossConfig {
  double lambda_edge = 20.0;
  double bce_epsilon = 1e-7;
};

// Hard 3x3 morphology on {0,1} masks with replicate border, so a mask
// touching the frame produces no spurious boundary there.
Tensor dilate3x3(const Tensor& mask);
Tensor erode3x3(const Tensor& mask);

// |dilate(mask) - erode(mask)|, values in {0,1}. Throws on non-binary input.
Tensor edge_mask(const Tensor& mask);

// Mean sigmoid BCE between logits and a {0,1} target.
Tensor bce_loss(const Tensor& logits, const Tensor& target, double eps = 1e-7);

// BCE between the soft predicted boundary (max/min-pool morphology on
// sigmoid(logits)) and the hard ground-truth boundary.
Tensor edge_loss(const Tensor& pred_logits, const Tensor& gt_mask, double eps = 1e-7);

// bce_loss + lambda_edge * edge_loss.
Tensor total_loss(const Tensor& pred_logits, const Tensor& gt_mask,
                  const LossConfig& cfg = {});

}  // namespace revi
