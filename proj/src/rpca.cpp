#include "revi/rpca.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace revi {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

EMat to_eigen(const Mat& m) {
  return Eigen::Map<const EMat>(m.data.data(), m.rows, m.cols);
}

Mat from_eigen(const EMat& e) {
  Mat m(static_cast<int>(e.rows()), static_cast<int>(e.cols()));
  Eigen::Map<EMat>(m.data.data(), e.rows(), e.cols()) = e;
  return m;
}

Eigen::JacobiSVD<EMat> full_svd(const Mat& m) {
  Eigen::JacobiSVD<EMat> svd(to_eigen(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw NumericalError("svd did not converge on a " + std::to_string(m.rows) + "x" +
                         std::to_string(m.cols) + " matrix");
  return svd;
}

}  // namespace

double frob_norm(const Mat& m) {
  double acc = 0.0;
  for (double v : m.data) acc += v * v;
  return std::sqrt(acc);
}

double spectral_norm(const Mat& m) {
  auto svd = full_svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

double nuclear_norm(const Mat& m) {
  auto svd = full_svd(m);
  return svd.singularValues().sum();
}

int numeric_rank(const Mat& m, double tol) {
  auto svd = full_svd(m);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++r;
  return r;
}

Mat soft_threshold(const Mat& m, double tau) {
  if (tau < 0.0) throw NumericalError("soft_threshold: negative threshold");
  Mat out(m.rows, m.cols);
  for (size_t i = 0; i < m.data.size(); ++i) {
    double v = m.data[i];
    double mag = std::fabs(v) - tau;
    out.data[i] = mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

Mat svt(const Mat& m, double tau) {
  if (tau < 0.0) throw NumericalError("svt: negative threshold");
  auto svd = full_svd(m);
  Eigen::VectorXd s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::max(s(i) - tau, 0.0);
  EMat rec = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  return from_eigen(rec);
}

RpcaResult rpca_decompose(const Mat& d, const RpcaConfig& cfg) {
  if (d.rows <= 0 || d.cols <= 0) throw NumericalError("rpca_decompose: empty matrix");
  for (double v : d.data)
    if (!std::isfinite(v)) throw NumericalError("rpca_decompose: non-finite input");
  if (cfg.max_iter < 1 || cfg.tol < 0.0 || cfg.mu_growth <= 1.0)
    throw NumericalError("rpca_decompose: invalid config");

  double lambda = cfg.sparsity_weight > 0.0
                      ? cfg.sparsity_weight
                      : 1.0 / std::sqrt(static_cast<double>(std::max(d.rows, d.cols)));
  double norm_d = frob_norm(d);

  RpcaResult res;
  res.low_rank = Mat(d.rows, d.cols);
  res.sparse = Mat(d.rows, d.cols);
  if (norm_d == 0.0) {  // zero observation decomposes trivially
    res.iterations = 1;
    res.converged = true;
    res.residual_history.push_back(0.0);
    return res;
  }

  double spec = spectral_norm(d);
  double mu = cfg.mu_init > 0.0 ? cfg.mu_init : 1.25 / spec;
  double mu_max = mu * cfg.mu_max_factor;

  // Dual ascent on Y with alternating proximal minimization in B and O.
  // mu grows only once the sparse iterate has settled at the current
  // penalty (the classical inexact-ALM growth rule), which keeps the
  // residual trajectory monotone instead of overshooting near convergence.
  EMat D = to_eigen(d);
  EMat Y = D / std::max(spec, D.cwiseAbs().maxCoeff() / lambda);
  EMat B = EMat::Zero(d.rows, d.cols);
  EMat O = EMat::Zero(d.rows, d.cols);
  EMat O_prev = O;
  const double settle_tol = cfg.mu_settle;

  for (int it = 0; it < cfg.max_iter; ++it) {
    Mat target = from_eigen(D - O + Y / mu);
    B = to_eigen(svt(target, 1.0 / mu));
    Mat starget = from_eigen(D - B + Y / mu);
    O_prev.swap(O);
    O = to_eigen(soft_threshold(starget, lambda / mu));
    EMat residual = D - B - O;
    Y += mu * residual;
    if (mu * (O - O_prev).norm() / norm_d < settle_tol)
      mu = std::min(mu * cfg.mu_growth, mu_max);

    double rel = residual.norm() / norm_d;
    res.residual_history.push_back(rel);
    res.iterations = it + 1;
    if (cfg.tol > 0.0 && rel <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.low_rank = from_eigen(B);
  res.sparse = from_eigen(O);
  return res;
}

DecompositionState unroll_iterate(const Tensor& d0, const Tensor& o0, int k,
                                  const TensorOp& prox_op, const TensorOp& grad_op,
                                  double rho) {
  if (k < 1) throw NumericalError("unroll_iterate: K must be >= 1");
  if (d0.shape() != o0.shape())
    throw ShapeError("unroll_iterate: D0 " + shape_str(d0.shape()) + " vs O0 " +
                     shape_str(o0.shape()));
  DecompositionState st;
  st.d = d0;
  st.o = o0;
  for (st.k = 1; st.k <= k; ++st.k) {
    Tensor b = prox_op(sub(st.d, st.o));
    if (b.shape() != st.d.shape())
      throw ShapeError("unroll_iterate: prox operator changed shape to " +
                       shape_str(b.shape()));
    Tensor g = grad_op(st.o);
    if (g.shape() != st.o.shape())
      throw ShapeError("unroll_iterate: gradient operator changed shape to " +
                       shape_str(g.shape()));
    Tensor o_next = sub(add(st.o, sub(st.d, b)), mul_scalar(g, rho));
    st.b = b;
    st.o = o_next;
    st.d = add(st.b, st.o);  // combine: D == B + O exactly
  }
  st.k = k;
  return st;
}

TensorOp make_svt_prox(double tau) {
  return [tau](const Tensor& t) {
    if (t.shape().size() != 2) throw ShapeError("svt prox expects a matrix tensor");
    Mat m(t.dim(0), t.dim(1));
    auto src = t.data();
    std::copy(src.begin(), src.end(), m.data.begin());
    Mat r = svt(m, tau);
    return Tensor::from_data(t.shape(), r.data);
  };
}

TensorOp make_identity_prox() {
  return [](const Tensor& t) { return t; };
}

TensorOp make_zero_grad() {
  return [](const Tensor& t) { return Tensor::zeros(t.shape()); };
}

TensorOp make_l2_grad(double coeff) {
  return [coeff](const Tensor& t) { return mul_scalar(t, coeff); };
}

}  // namespace revi
