#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "revi/tensor.hpp"

namespace revi {

class SeedStream;

// Low-rank additive update to a frozen weight matrix: W = W0 + up.down.
// w0 never receives gradient; up starts at zero so the update is a no-op
// until trained.
struct LoraWeights {
  Tensor w0;    // frozen [d, k]
  Tensor down;  // trainable [r, k]
  Tensor up;    // trainable [d, r]
  int rank = 0;

  // Enforces rank >= 1 and rank <= min(d, k) / 4.
  static LoraWeights make(const Tensor& w0, int rank, SeedStream& rng);
};

// x [T,k] -> x.(w0 + scaling * up.down)^T, evaluated as
// x.w0^T + scaling * (x.down^T).up^T so the low-rank path stays cheap.
Tensor lora_forward(const Tensor& x, const LoraWeights& lw, double scaling);

// 1x1 conv plus bilinear resize. Bridges the hidden state (and the
// enhancement term) across blocks whose output grid differs from the input.
struct Reproj {
  Tensor w;  // [out_c, in_c, 1, 1]
  Tensor b;  // [out_c]
  int out_h = 0, out_w = 0;

  static Reproj init(int in_c, int out_c, int out_h, int out_w, SeedStream& rng);
  Tensor forward(const Tensor& grid) const;
};

// Weights of one adapter site: SKA conv, the two-layer network phi of MKE,
// the deviation conv, and the scalar step size / enhancement coefficients.
// phi's second layer, the deviation conv and alpha start at zero, so a
// fresh adapter is an exact no-op on the host model.
struct ReviAdapterWeights {
  Tensor ska_w, ska_b;
  Tensor phi1_w, phi1_b;
  Tensor phi2_w, phi2_b;
  Tensor delta_w, delta_b;
  Tensor rho;    // [1]
  Tensor alpha;  // [1]
  std::optional<Reproj> out_proj;

  static ReviAdapterWeights init(int channels, double rho_init, double alpha_init,
                                 SeedStream& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Semantic knowledge approximation: B = Conv(D - O) + (D - O).
Tensor ska_forward(const Tensor& d_prev, const Tensor& o_prev,
                   const ReviAdapterWeights& w);

// Manipulation knowledge enhancement:
//   X = O_prev + D_prev - B
//   O = X - rho * phi(X + Conv_delta(X))
Tensor mke_forward(const Tensor& d_prev, const Tensor& b, const Tensor& o_prev,
                   const ReviAdapterWeights& w);

// D = block_out + alpha * O.
Tensor enhance(const Tensor& block_out, const Tensor& o, const Tensor& alpha);

// Hidden manipulation state carried between adapted blocks.
struct AdapterState {
  Tensor o;
};

using BlockFn = std::function<Tensor(const Tensor&)>;

struct AdapterStepResult {
  Tensor d;            // enhanced block output
  AdapterState state;  // o for the next adapted block (reprojected if needed)
  Tensor b;            // SKA output, kept for traces
  Tensor o_raw;        // MKE output before reprojection
};

// One unrolled iteration around block Q_i.
AdapterStepResult adapter_step(const BlockFn& block, const Tensor& d_prev,
                               const AdapterState& state, const ReviAdapterWeights& w);

// Parameter-matched plain baseline: five stacked convolutions (four 3x3
// and one 1x1), ReLU between, added to the block output through the same
// zero-initialized alpha ramp as the structured adapter.
struct ConvStackAdapter {
  std::vector<Tensor> ws, bs;
  Tensor alpha;  // [1]
  std::optional<Reproj> out_proj;

  static ConvStackAdapter init(int channels, SeedStream& rng);
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
  Tensor forward(const Tensor& grid) const;  // the stack itself
};

}  // namespace revi
