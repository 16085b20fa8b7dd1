#pragma once

#include <functional>
#include <vector>

#include "revi/tensor.hpp"

namespace revi {

// Small dense row-major matrix used by the classical solver and image I/O.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }
};

double frob_norm(const Mat& m);
double spectral_norm(const Mat& m);
double nuclear_norm(const Mat& m);
int numeric_rank(const Mat& m, double tol = 1e-10);

// Elementwise shrinkage sign(m) * max(|m| - tau, 0).
Mat soft_threshold(const Mat& m, double tau);

// Singular value thresholding: soft-threshold the singular values.
Mat svt(const Mat& m, double tau);

struct RpcaConfig {
  double sparsity_weight = 0.0;  // 0 -> 1/sqrt(max(rows, cols))
  double tol = 1e-7;             // on ||D-B-O||_F / ||D||_F; 0 disables early stop
  int max_iter = 500;
  double mu_init = 0.0;          // 0 -> 1.25 / ||D||_2
  double mu_growth = 1.5;
  double mu_settle = 1e-8;       // grow mu only once the sparse iterate settles
  double mu_max_factor = 1e7;    // cap relative to mu_init
};

struct RpcaResult {
  Mat low_rank;   // B
  Mat sparse;     // O
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  // relative residual per iteration
};

// Classical robust PCA via the inexact augmented Lagrangian method:
// min ||B||_* + lambda ||O||_1  s.t.  D = B + O.
// Non-convergence within max_iter returns the best iterate with
// converged = false rather than throwing.
RpcaResult rpca_decompose(const Mat& d, const RpcaConfig& cfg = {});

// One decomposition state of the unrolled iteration. After the combine
// step D == B + O holds exactly (it is an assignment).
struct DecompositionState {
  Tensor d;
  Tensor b;
  Tensor o;
  int k = 0;
};

using TensorOp = std::function<Tensor(const Tensor&)>;

// Generic unrolling engine, executed literally:
//   B^k = prox(D^{k-1} - O^{k-1})
//   O^k = O^{k-1} + D^{k-1} - B^k - rho * grad(O^{k-1})
//   D^k = B^k + O^k
// With classical operators this reproduces a proximal scheme; with neural
// operators it reproduces the adapter's ancestry. Operators must preserve
// shape; drift is an error.
DecompositionState unroll_iterate(const Tensor& d0, const Tensor& o0, int k,
                                  const TensorOp& prox_op, const TensorOp& grad_op,
                                  double rho);

// Classical operator factories for the unrolling engine.
TensorOp make_svt_prox(double tau);
TensorOp make_identity_prox();
TensorOp make_zero_grad();
TensorOp make_l2_grad(double coeff);  // smooth Tikhonov gradient coeff * O

}  // namespace revi
