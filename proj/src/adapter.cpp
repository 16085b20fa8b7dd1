#include "revi/adapter.hpp"

#include <algorithm>
#include <cmath>

#include "revi/rng.hpp"

namespace revi {

namespace {

Tensor kaiming_conv(int out_c, int in_c, int k, SeedStream& rng) {
  double bound = std::sqrt(6.0 / (in_c * k * k));
  return Tensor::uniform({out_c, in_c, k, k}, -bound, bound, rng, true);
}

}  // namespace

LoraWeights LoraWeights::make(const Tensor& w0, int rank, SeedStream& rng) {
  if (w0.shape().size() != 2) throw ShapeError("LoraWeights: w0 must be a matrix");
  int d = w0.dim(0), k = w0.dim(1);
  if (rank < 1 || rank > std::min(d, k) / 4)
    throw ShapeError("LoraWeights: rank " + std::to_string(rank) +
                     " outside [1, min(d,k)/4] for w0 " + shape_str(w0.shape()));
  LoraWeights lw;
  lw.w0 = w0;
  lw.w0.set_requires_grad(false);
  double bound = std::sqrt(6.0 / k);
  lw.down = Tensor::uniform({rank, k}, -bound, bound, rng, true);
  lw.up = Tensor::zeros({d, rank}, true);
  lw.rank = rank;
  return lw;
}

Tensor lora_forward(const Tensor& x, const LoraWeights& lw, double scaling) {
  if (x.shape().size() != 2 || x.dim(1) != lw.w0.dim(1))
    throw ShapeError("lora_forward: x " + shape_str(x.shape()) + " does not match w0 " +
                     shape_str(lw.w0.shape()));
  Tensor base = matmul_nt(x, lw.w0);
  Tensor delta = matmul_nt(matmul_nt(x, lw.down), lw.up);
  return add(base, mul_scalar(delta, scaling));
}

Reproj Reproj::init(int in_c, int out_c, int out_h, int out_w, SeedStream& rng) {
  Reproj p;
  p.w = kaiming_conv(out_c, in_c, 1, rng);
  p.b = Tensor::zeros({out_c}, true);
  p.out_h = out_h;
  p.out_w = out_w;
  return p;
}

Tensor Reproj::forward(const Tensor& grid) const {
  Tensor projected = conv2d(grid, w, b);
  if (projected.dim(1) == out_h && projected.dim(2) == out_w) return projected;
  return bilinear_resize(projected, out_h, out_w);
}

ReviAdapterWeights ReviAdapterWeights::init(int channels, double rho_init,
                                            double alpha_init, SeedStream& rng) {
  ReviAdapterWeights w;
  w.ska_w = kaiming_conv(channels, channels, 3, rng);
  w.ska_b = Tensor::zeros({channels}, true);
  w.phi1_w = kaiming_conv(channels, channels, 3, rng);
  w.phi1_b = Tensor::zeros({channels}, true);
  w.phi2_w = Tensor::zeros({channels, channels, 3, 3}, true);
  w.phi2_b = Tensor::zeros({channels}, true);
  w.delta_w = Tensor::zeros({channels, channels, 3, 3}, true);
  w.delta_b = Tensor::zeros({channels}, true);
  w.rho = Tensor::full({1}, rho_init, true);
  w.alpha = Tensor::full({1}, alpha_init, true);
  return w;
}

void ReviAdapterWeights::collect(const std::string& prefix,
                                 std::vector<NamedParam>& out) const {
  out.push_back({prefix + ".ska.w", ska_w});
  out.push_back({prefix + ".ska.b", ska_b});
  out.push_back({prefix + ".phi1.w", phi1_w});
  out.push_back({prefix + ".phi1.b", phi1_b});
  out.push_back({prefix + ".phi2.w", phi2_w});
  out.push_back({prefix + ".phi2.b", phi2_b});
  out.push_back({prefix + ".delta.w", delta_w});
  out.push_back({prefix + ".delta.b", delta_b});
  out.push_back({prefix + ".rho", rho});
  out.push_back({prefix + ".alpha", alpha});
  if (out_proj) {
    out.push_back({prefix + ".proj.w", out_proj->w});
    out.push_back({prefix + ".proj.b", out_proj->b});
  }
}

Tensor ska_forward(const Tensor& d_prev, const Tensor& o_prev,
                   const ReviAdapterWeights& w) {
  if (d_prev.shape() != o_prev.shape())
    throw ShapeError("ska_forward: D " + shape_str(d_prev.shape()) + " vs O " +
                     shape_str(o_prev.shape()));
  Tensor residue = sub(d_prev, o_prev);
  return add(conv2d(residue, w.ska_w, w.ska_b), residue);
}

Tensor mke_forward(const Tensor& d_prev, const Tensor& b, const Tensor& o_prev,
                   const ReviAdapterWeights& w) {
  if (d_prev.shape() != b.shape() || d_prev.shape() != o_prev.shape())
    throw ShapeError("mke_forward: mismatched input shapes");
  Tensor x = sub(add(o_prev, d_prev), b);
  Tensor deviated = add(x, conv2d(x, w.delta_w, w.delta_b));
  Tensor phi = conv2d(relu(conv2d(deviated, w.phi1_w, w.phi1_b)), w.phi2_w, w.phi2_b);
  return sub(x, scale(phi, w.rho));
}

Tensor enhance(const Tensor& block_out, const Tensor& o, const Tensor& alpha) {
  if (block_out.shape() != o.shape())
    throw ShapeError("enhance: block output " + shape_str(block_out.shape()) +
                     " vs O " + shape_str(o.shape()));
  return add(block_out, scale(o, alpha));
}

AdapterStepResult adapter_step(const BlockFn& block, const Tensor& d_prev,
                               const AdapterState& state, const ReviAdapterWeights& w) {
  AdapterStepResult res;
  res.b = ska_forward(d_prev, state.o, w);
  res.o_raw = mke_forward(d_prev, res.b, state.o, w);
  Tensor o_out = w.out_proj ? w.out_proj->forward(res.o_raw) : res.o_raw;
  res.d = enhance(block(d_prev), o_out, w.alpha);
  res.state.o = o_out;
  return res;
}

ConvStackAdapter ConvStackAdapter::init(int channels, SeedStream& rng) {
  ConvStackAdapter a;
  for (int i = 0; i < 5; ++i) {
    int k = i < 4 ? 3 : 1;
    a.ws.push_back(kaiming_conv(channels, channels, k, rng));
    a.bs.push_back(Tensor::zeros({channels}, true));
  }
  a.alpha = Tensor::zeros({1}, true);
  return a;
}

void ConvStackAdapter::collect(const std::string& prefix,
                               std::vector<NamedParam>& out) const {
  for (size_t i = 0; i < ws.size(); ++i) {
    out.push_back({prefix + ".conv" + std::to_string(i) + ".w", ws[i]});
    out.push_back({prefix + ".conv" + std::to_string(i) + ".b", bs[i]});
  }
  out.push_back({prefix + ".alpha", alpha});
  if (out_proj) {
    out.push_back({prefix + ".proj.w", out_proj->w});
    out.push_back({prefix + ".proj.b", out_proj->b});
  }
}

Tensor ConvStackAdapter::forward(const Tensor& grid) const {
  Tensor x = grid;
  for (size_t i = 0; i < ws.size(); ++i) {
    x = conv2d(x, ws[i], bs[i]);
    if (i + 1 < ws.size()) x = relu(x);
  }
  return x;
}

}  // namespace revi
