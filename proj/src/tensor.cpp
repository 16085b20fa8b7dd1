#include "revi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "revi/rng.hpp"

namespace revi {

using detail::Node;

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::shared_ptr<Node> make_leaf(std::vector<int> shape, std::vector<double> data,
                                bool requires_grad) {
  auto n = std::make_shared<Node>();
  if (static_cast<int64_t>(data.size()) != numel_of(shape))
    throw ShapeError("data length does not match shape " + shape_str(shape));
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  n->needs_grad = requires_grad;
  return n;
}

// Output node of an op. needs_grad propagates from the inputs; the
// backward closure is attached only when some input wants gradient.
std::shared_ptr<Node> make_op(std::vector<int> shape,
                              std::vector<std::shared_ptr<Node>> inputs,
                              std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data.assign(static_cast<size_t>(numel_of(n->shape)), 0.0);
  n->is_leaf = false;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in->needs_grad;
  n->needs_grad = needs;
  n->inputs = std::move(inputs);
  if (needs) n->backward_fn = std::move(backward_fn);
  return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

// Accumulate g into the node's grad if it participates in the sweep.
void accum(Node& n, const double* g, size_t len) {
  if (!n.needs_grad) return;
  n.ensure_grad();
  for (size_t i = 0; i < len; ++i) n.grad[i] += g[i];
}

// Dot product with eight independent accumulators. The explicit summation
// tree both vectorizes under strict FP semantics and stays deterministic.
inline double dot8(const double* a, const double* b, size_t n) {
  double s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int j = 0; j < 8; ++j) s[j] += a[i + j] * b[i + j];
  double acc = ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(double* y, double a, const double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor Tensor::wrap(std::shared_ptr<Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto n = numel_of(shape);
  return wrap(make_leaf(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0),
                        requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  auto n = numel_of(shape);
  return wrap(make_leaf(std::move(shape), std::vector<double>(static_cast<size_t>(n), value),
                        requires_grad));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  return wrap(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, SeedStream& rng,
                       bool requires_grad) {
  auto n = numel_of(shape);
  std::vector<double> d(static_cast<size_t>(n));
  for (auto& v : d) v = rng.uniform(lo, hi);
  return from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::normal(std::vector<int> shape, double stddev, SeedStream& rng,
                      bool requires_grad) {
  auto n = numel_of(shape);
  std::vector<double> d(static_cast<size_t>(n));
  for (auto& v : d) v = stddev * rng.normal();
  return from_data(std::move(shape), std::move(d), requires_grad);
}

const std::vector<int>& Tensor::shape() const {
  if (!node_) throw AutodiffError("use of undefined tensor");
  return node_->shape;
}

int Tensor::numel() const { return node_ ? node_->numel() : 0; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!node_) throw AutodiffError("use of undefined tensor");
  if (!node_->is_leaf) throw AutodiffError("requires_grad is a leaf property");
  node_->requires_grad = value;
  node_->needs_grad = value;
  if (!value) node_->grad.clear();
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
  return node_->data[0];
}

std::span<const double> Tensor::data() const& {
  if (!node_) throw AutodiffError("use of undefined tensor");
  return {node_->data.data(), node_->data.size()};
}

std::span<double> Tensor::mutable_data() & {
  if (!node_) throw AutodiffError("use of undefined tensor");
  if (!node_->is_leaf) throw AutodiffError("mutable_data on non-leaf tensor");
  return {node_->data.data(), node_->data.size()};
}

const std::vector<double>* Tensor::grad() const& {
  if (!node_ || node_->grad.empty()) return nullptr;
  return &node_->grad;
}

void Tensor::zero_grad() const {
  if (node_) node_->grad.clear();
}

// ------------------------------------------------------------- elementwise

namespace {

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  check_same_shape(a, b, name);
  auto an = a.node(), bn = b.node();
  size_t n = an->data.size();
  auto out = make_op(an->shape, {an, bn}, [op](Node& self) {
    Node& a = *self.inputs[0];
    Node& b = *self.inputs[1];
    size_t n = self.data.size();
    const double* g = self.grad.data();
    if (a.needs_grad) {
      a.ensure_grad();
      switch (op) {
        case BinOp::Add:
        case BinOp::Sub:
          for (size_t i = 0; i < n; ++i) a.grad[i] += g[i];
          break;
        case BinOp::Mul:
          for (size_t i = 0; i < n; ++i) a.grad[i] += g[i] * b.data[i];
          break;
        case BinOp::Div:
          for (size_t i = 0; i < n; ++i) a.grad[i] += g[i] / b.data[i];
          break;
      }
    }
    if (b.needs_grad) {
      b.ensure_grad();
      switch (op) {
        case BinOp::Add:
          for (size_t i = 0; i < n; ++i) b.grad[i] += g[i];
          break;
        case BinOp::Sub:
          for (size_t i = 0; i < n; ++i) b.grad[i] -= g[i];
          break;
        case BinOp::Mul:
          for (size_t i = 0; i < n; ++i) b.grad[i] += g[i] * a.data[i];
          break;
        case BinOp::Div:
          for (size_t i = 0; i < n; ++i)
            b.grad[i] -= g[i] * a.data[i] / (b.data[i] * b.data[i]);
          break;
      }
    }
  });
  const double* pa = an->data.data();
  const double* pb = bn->data.data();
  double* po = out->data.data();
  switch (op) {
    case BinOp::Add:
      for (size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
      break;
    case BinOp::Sub:
      for (size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
      break;
    case BinOp::Mul:
      for (size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
      break;
    case BinOp::Div:
      for (size_t i = 0; i < n; ++i) po[i] = pa[i] / pb[i];
      break;
  }
  return Tensor::wrap(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Div, "div"); }

Tensor add_scalar(const Tensor& a, double s) {
  auto an = a.node();
  auto out = make_op(an->shape, {an}, [](Node& self) {
    accum(*self.inputs[0], self.grad.data(), self.data.size());
  });
  for (size_t i = 0; i < an->data.size(); ++i) out->data[i] = an->data[i] + s;
  return Tensor::wrap(out);
}

Tensor mul_scalar(const Tensor& a, double s) {
  auto an = a.node();
  auto out = make_op(an->shape, {an}, [s](Node& self) {
    Node& a = *self.inputs[0];
    if (!a.needs_grad) return;
    a.ensure_grad();
    for (size_t i = 0; i < self.data.size(); ++i) a.grad[i] += s * self.grad[i];
  });
  for (size_t i = 0; i < an->data.size(); ++i) out->data[i] = s * an->data[i];
  return Tensor::wrap(out);
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor relu(const Tensor& a) {
  auto an = a.node();
  auto out = make_op(an->shape, {an}, [](Node& self) {
    Node& a = *self.inputs[0];
    if (!a.needs_grad) return;
    a.ensure_grad();
    for (size_t i = 0; i < self.data.size(); ++i)
      if (a.data[i] > 0.0) a.grad[i] += self.grad[i];
  });
  for (size_t i = 0; i < an->data.size(); ++i)
    out->data[i] = an->data[i] > 0.0 ? an->data[i] : 0.0;
  return Tensor::wrap(out);
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Tensor sigmoid(const Tensor& a) {
  auto an = a.node();
  auto out = make_op(an->shape, {an}, [](Node& self) {
    Node& a = *self.inputs[0];
    if (!a.needs_grad) return;
    a.ensure_grad();
    for (size_t i = 0; i < self.data.size(); ++i) {
      double y = self.data[i];
      a.grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
  for (size_t i = 0; i < an->data.size(); ++i) out->data[i] = stable_sigmoid(an->data[i]);
  return Tensor::wrap(out);
}

Tensor scale(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) throw ShapeError("scale: coefficient must be a [1] tensor");
  auto an = a.node(), sn = s.node();
  auto out = make_op(an->shape, {an, sn}, [](Node& self) {
    Node& a = *self.inputs[0];
    Node& s = *self.inputs[1];
    double sv = s.data[0];
    if (a.needs_grad) {
      a.ensure_grad();
      for (size_t i = 0; i < self.data.size(); ++i) a.grad[i] += sv * self.grad[i];
    }
    if (s.needs_grad) {
      s.ensure_grad();
      double acc = 0.0;
      for (size_t i = 0; i < self.data.size(); ++i) acc += self.grad[i] * a.data[i];
      s.grad[0] += acc;
    }
  });
  double sv = sn->data[0];
  for (size_t i = 0; i < an->data.size(); ++i) out->data[i] = sv * an->data[i];
  return Tensor::wrap(out);
}

// ---------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2)
    throw ShapeError("matmul: expects 2-d tensors");
  int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw ShapeError("matmul: inner dimension mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  auto an = a.node(), bn = b.node();
  auto out = make_op({m, n}, {an, bn}, [m, k, n](Node& self) {
    Node& a = *self.inputs[0];
    Node& b = *self.inputs[1];
    const double* g = self.grad.data();
    if (a.needs_grad) {
      a.ensure_grad();  // dA = G . B^T
      for (int i = 0; i < m; ++i) {
        const double* gi = g + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk)
          a.grad[static_cast<size_t>(i) * k + kk] +=
              dot8(gi, b.data.data() + static_cast<size_t>(kk) * n, static_cast<size_t>(n));
      }
    }
    if (b.needs_grad) {
      b.ensure_grad();  // dB = A^T . G
      for (int i = 0; i < m; ++i) {
        const double* ai = a.data.data() + static_cast<size_t>(i) * k;
        const double* gi = g + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk)
          axpy(b.grad.data() + static_cast<size_t>(kk) * n, ai[kk], gi, static_cast<size_t>(n));
      }
    }
  });
  const double* pa = an->data.data();
  const double* pb = bn->data.data();
  double* po = out->data.data();
  for (int i = 0; i < m; ++i) {
    double* oi = po + static_cast<size_t>(i) * n;
    const double* ai = pa + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk)
      axpy(oi, ai[kk], pb + static_cast<size_t>(kk) * n, static_cast<size_t>(n));
  }
  return Tensor::wrap(out);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2)
    throw ShapeError("matmul_nt: expects 2-d tensors");
  int m = a.dim(0), k = a.dim(1), n = b.dim(0), k2 = b.dim(1);
  if (k != k2)
    throw ShapeError("matmul_nt: inner dimension mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  auto an = a.node(), bn = b.node();
  auto out = make_op({m, n}, {an, bn}, [m, k, n](Node& self) {
    Node& a = *self.inputs[0];
    Node& b = *self.inputs[1];
    const double* g = self.grad.data();
    if (a.needs_grad) {
      a.ensure_grad();  // dA = G . B
      for (int i = 0; i < m; ++i) {
        const double* gi = g + static_cast<size_t>(i) * n;
        double* ag = a.grad.data() + static_cast<size_t>(i) * k;
        for (int j = 0; j < n; ++j)
          axpy(ag, gi[j], b.data.data() + static_cast<size_t>(j) * k, static_cast<size_t>(k));
      }
    }
    if (b.needs_grad) {
      b.ensure_grad();  // dB = G^T . A
      for (int i = 0; i < m; ++i) {
        const double* gi = g + static_cast<size_t>(i) * n;
        const double* ai = a.data.data() + static_cast<size_t>(i) * k;
        for (int j = 0; j < n; ++j)
          axpy(b.grad.data() + static_cast<size_t>(j) * k, gi[j], ai, static_cast<size_t>(k));
      }
    }
  });
  const double* pa = an->data.data();
  const double* pb = bn->data.data();
  double* po = out->data.data();
  for (int i = 0; i < m; ++i) {
    const double* ai = pa + static_cast<size_t>(i) * k;
    double* oi = po + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j)
      oi[j] = dot8(ai, pb + static_cast<size_t>(j) * k, static_cast<size_t>(k));
  }
  return Tensor::wrap(out);
}

Tensor transpose2d(const Tensor& a) {
  if (a.shape().size() != 2) throw ShapeError("transpose2d: expects 2-d tensor");
  int m = a.dim(0), n = a.dim(1);
  auto an = a.node();
  auto out = make_op({n, m}, {an}, [m, n](Node& self) {
    Node& a = *self.inputs[0];
    if (!a.needs_grad) return;
    a.ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        a.grad[static_cast<size_t>(j) * n + i] += self.grad[static_cast<size_t>(i) * m + j];
  });
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out->data[static_cast<size_t>(j) * m + i] = an->data[static_cast<size_t>(i) * n + j];
  return Tensor::wrap(out);
}

Tensor slice_cols(const Tensor& a, int start, int len) {
  if (a.shape().size() != 2) throw ShapeError("slice_cols: expects 2-d tensor");
  int m = a.dim(0), n = a.dim(1);
  if (start < 0 || len <= 0 || start + len > n)
    throw ShapeError("slice_cols: range out of bounds");
  auto an = a.node();
  auto out = make_op({m, len}, {an}, [m, n, start, len](Node& self) {
    Node& a = *self.inputs[0];
    if (!a.needs_grad) return;
    a.ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < len; ++j)
        a.grad[static_cast<size_t>(i) * n + start + j] +=
            self.grad[static_cast<size_t>(i) * len + j];
  });
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < len; ++j)
      out->data[static_cast<size_t>(i) * len + j] =
          an->data[static_cast<size_t>(i) * n + start + j];
  return Tensor::wrap(out);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty input");
  int m = parts[0].dim(0);
  int total = 0;
  std::vector<std::shared_ptr<Node>> ins;
  std::vector<int> widths;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.dim(0) != m)
      throw ShapeError("concat_cols: row count mismatch");
    widths.push_back(p.dim(1));
    total += p.dim(1);
    ins.push_back(p.node());
  }
  auto out = make_op({m, total}, std::move(ins), [m, total, widths](Node& self) {
    int off = 0;
    for (size_t p = 0; p < self.inputs.size(); ++p) {
      Node& in = *self.inputs[p];
      int w = widths[p];
      if (in.needs_grad) {
        in.ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < w; ++j)
            in.grad[static_cast<size_t>(i) * w + j] +=
                self.grad[static_cast<size_t>(i) * total + off + j];
      }
      off += w;
    }
  });
  int off = 0;
  for (const auto& p : parts) {
    int w = p.dim(1);
    auto src = p.data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j)
        out->data[static_cast<size_t>(i) * total + off + j] = src[static_cast<size_t>(i) * w + j];
    off += w;
  }
  return Tensor::wrap(out);
}

Tensor softmax_rows(const Tensor& a) {
  if (a.shape().size() != 2) throw ShapeError("softmax_rows: expects 2-d tensor");
  int m = a.dim(0), n = a.dim(1);
  auto an = a.node();
  auto out = make_op({m, n}, {an}, [m, n](Node& self) {
    Node& a = *self.inputs[0];
    if (!a.needs_grad) return;
    a.ensure_grad();
    for (int i = 0; i < m; ++i) {
      const double* y = self.data.data() + static_cast<size_t>(i) * n;
      const double* g = self.grad.data() + static_cast<size_t>(i) * n;
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += y[j] * g[j];
      double* ag = a.grad.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) ag[j] += y[j] * (g[j] - dot);
    }
  });
  for (int i = 0; i < m; ++i) {
    const double* x = an->data.data() + static_cast<size_t>(i) * n;
    double* y = out->data.data() + static_cast<size_t>(i) * n;
    double mx = x[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (int j = 0; j < n; ++j) y[j] /= z;
  }
  return Tensor::wrap(out);
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
  if (a.shape().size() != 2 || bias.shape().size() != 1 || bias.dim(0) != a.dim(1))
    throw ShapeError("add_row_bias: bias " + shape_str(bias.shape()) +
                     " does not match " + shape_str(a.shape()));
  int m = a.dim(0), n = a.dim(1);
  auto an = a.node(), bn = bias.node();
  auto out = make_op({m, n}, {an, bn}, [m, n](Node& self) {
    Node& a = *self.inputs[0];
    Node& b = *self.inputs[1];
    if (a.needs_grad) accum(a, self.grad.data(), self.data.size());
    if (b.needs_grad) {
      b.ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) b.grad[j] += self.grad[static_cast<size_t>(i) * n + j];
    }
  });
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out->data[static_cast<size_t>(i) * n + j] =
          an->data[static_cast<size_t>(i) * n + j] + bn->data[j];
  return Tensor::wrap(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.shape().size() != 2) throw ShapeError("layer_norm: expects 2-d tensor");
  int m = x.dim(0), n = x.dim(1);
  if (gamma.shape() != std::vector<int>{n} || beta.shape() != std::vector<int>{n})
    throw ShapeError("layer_norm: affine params must be [" + std::to_string(n) + "]");
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  auto out = make_op({m, n}, {xn, gn, bn}, [m, n, eps](Node& self) {
    Node& x = *self.inputs[0];
    Node& g = *self.inputs[1];
    Node& b = *self.inputs[2];
    for (int i = 0; i < m; ++i) {
      const double* xi = x.data.data() + static_cast<size_t>(i) * n;
      const double* go = self.grad.data() + static_cast<size_t>(i) * n;
      double mu = 0.0;
      for (int j = 0; j < n; ++j) mu += xi[j];
      mu /= n;
      double var = 0.0;
      for (int j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
      var /= n;
      double inv = 1.0 / std::sqrt(var + eps);
      if (g.needs_grad || b.needs_grad) {
        if (g.needs_grad) g.ensure_grad();
        if (b.needs_grad) b.ensure_grad();
        for (int j = 0; j < n; ++j) {
          double xhat = (xi[j] - mu) * inv;
          if (g.needs_grad) g.grad[j] += go[j] * xhat;
          if (b.needs_grad) b.grad[j] += go[j];
        }
      }
      if (x.needs_grad) {
        x.ensure_grad();
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < n; ++j) {
          double xhat = (xi[j] - mu) * inv;
          double dxhat = go[j] * g.data[j];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
        double* xg = x.grad.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
          double xhat = (xi[j] - mu) * inv;
          double dxhat = go[j] * g.data[j];
          xg[j] += inv * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / n);
        }
      }
    }
  });
  for (int i = 0; i < m; ++i) {
    const double* xi = xn->data.data() + static_cast<size_t>(i) * n;
    double* yo = out->data.data() + static_cast<size_t>(i) * n;
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += xi[j];
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= n;
    double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j)
      yo[j] = (xi[j] - mu) * inv * gn->data[j] + bn->data[j];
  }
  return Tensor::wrap(out);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
  if (q.shape().size() != 2) throw ShapeError("attention: expects 2-d tensors");
  check_same_shape(q, k, "attention");
  check_same_shape(q, v, "attention");
  int d = q.dim(1);
  if (heads < 1 || d % heads != 0)
    throw ShapeError("attention: model dim " + std::to_string(d) +
                     " not divisible by head count " + std::to_string(heads));
  int dh = d / heads;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    Tensor scores = mul_scalar(matmul_nt(qh, kh), inv_sqrt);
    Tensor w = softmax_rows(scores);
    outs.push_back(matmul(w, vh));
  }
  return heads == 1 ? outs[0] : concat_cols(outs);
}

// ----------------------------------------------------------------- spatial

namespace {

// Position-major im2col: row p of the result is the flattened receptive
// field (ci, ky, kx) of output position p, zero-padded at the borders.
// Long contiguous rows turn the convolution and both gradient passes into
// plain dot/axpy kernels.
std::shared_ptr<std::vector<double>> im2col(const double* x, int ci, int hh, int ww,
                                            int kh, int kw) {
  int ph = kh / 2, pw = kw / 2;
  size_t K = static_cast<size_t>(ci) * kh * kw;
  size_t hw = static_cast<size_t>(hh) * ww;
  auto col = std::make_shared<std::vector<double>>(hw * K, 0.0);
  double* c = col->data();
  for (int y = 0; y < hh; ++y)
    for (int xx = 0; xx < ww; ++xx) {
      double* row = c + (static_cast<size_t>(y) * ww + xx) * K;
      for (int ic = 0; ic < ci; ++ic) {
        const double* xp = x + static_cast<size_t>(ic) * hw;
        for (int ky = 0; ky < kh; ++ky) {
          int sy = y + ky - ph;
          if (sy < 0 || sy >= hh) continue;
          const double* xr = xp + static_cast<size_t>(sy) * ww;
          double* rr = row + (static_cast<size_t>(ic) * kh + ky) * kw;
          int x0 = std::max(0, pw - xx), x1 = std::min(kw, ww + pw - xx);
          for (int kx = x0; kx < x1; ++kx) rr[kx] = xr[xx + kx - pw];
        }
      }
    }
  return col;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.shape().size() != 3 || w.shape().size() != 4)
    throw ShapeError("conv2d: expects x [C,H,W] and w [Co,Ci,kh,kw]");
  int ci = x.dim(0), hh = x.dim(1), ww = x.dim(2);
  int co = w.dim(0), wci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (ci != wci)
    throw ShapeError("conv2d: channel mismatch x " + shape_str(x.shape()) + " vs w " +
                     shape_str(w.shape()));
  if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d: kernel must be odd");
  if (bias.shape() != std::vector<int>{co})
    throw ShapeError("conv2d: bias must be [" + std::to_string(co) + "]");
  int ph = kh / 2, pw = kw / 2;
  auto xn = x.node(), wn = w.node(), bn = bias.node();
  const size_t K = static_cast<size_t>(ci) * kh * kw;
  const size_t hw = static_cast<size_t>(hh) * ww;

  auto col = im2col(xn->data.data(), ci, hh, ww, kh, kw);

  auto out = make_op({co, hh, ww}, {xn, wn, bn},
                     [ci, hh, ww, co, kh, kw, ph, pw, K, hw, col](Node& self) {
    Node& x = *self.inputs[0];
    Node& w = *self.inputs[1];
    Node& b = *self.inputs[2];
    const double* g = self.grad.data();
    if (b.needs_grad) {
      b.ensure_grad();
      for (int oc = 0; oc < co; ++oc) {
        const double* gp = g + oc * hw;
        double acc = 0.0;
        for (size_t i = 0; i < hw; ++i) acc += gp[i];
        b.grad[oc] += acc;
      }
    }
    if (w.needs_grad) {
      w.ensure_grad();  // dW[oc] += sum_p g[oc][p] * col[p]
      const double* c = col->data();
      for (int oc = 0; oc < co; ++oc) {
        const double* gp = g + oc * hw;
        double* wg = w.grad.data() + static_cast<size_t>(oc) * K;
        for (size_t p = 0; p < hw; ++p) {
          if (gp[p] == 0.0) continue;
          axpy(wg, gp[p], c + p * K, K);
        }
      }
    }
    if (x.needs_grad) {
      x.ensure_grad();
      // dcol[p] = sum_oc g[oc][p] * W[oc], then scatter back to the grid
      std::vector<double> dcol(hw * K, 0.0);
      for (int oc = 0; oc < co; ++oc) {
        const double* gp = g + oc * hw;
        const double* wk = w.data.data() + static_cast<size_t>(oc) * K;
        for (size_t p = 0; p < hw; ++p) {
          if (gp[p] == 0.0) continue;
          axpy(dcol.data() + p * K, gp[p], wk, K);
        }
      }
      for (int y = 0; y < hh; ++y)
        for (int xx = 0; xx < ww; ++xx) {
          const double* row = dcol.data() + (static_cast<size_t>(y) * ww + xx) * K;
          for (int ic = 0; ic < ci; ++ic) {
            double* xg = x.grad.data() + static_cast<size_t>(ic) * hw;
            for (int ky = 0; ky < kh; ++ky) {
              int sy = y + ky - ph;
              if (sy < 0 || sy >= hh) continue;
              double* xr = xg + static_cast<size_t>(sy) * ww;
              const double* rr = row + (static_cast<size_t>(ic) * kh + ky) * kw;
              int x0 = std::max(0, pw - xx), x1 = std::min(kw, ww + pw - xx);
              for (int kx = x0; kx < x1; ++kx) xr[xx + kx - pw] += rr[kx];
            }
          }
        }
    }
  });

  const double* c = col->data();
  const double* wp = wn->data.data();
  double* op = out->data.data();
  for (int oc = 0; oc < co; ++oc) {
    const double* wk = wp + static_cast<size_t>(oc) * K;
    double bv = bn->data[oc];
    double* orow = op + oc * hw;
    for (size_t p = 0; p < hw; ++p) orow[p] = dot8(wk, c + p * K, K) + bv;
  }
  return Tensor::wrap(out);
}

Tensor patchify(const Tensor& img, int patch) {
  if (img.shape().size() != 3) throw ShapeError("patchify: expects [C,H,W]");
  int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (patch <= 0 || h % patch != 0 || w % patch != 0)
    throw ShapeError("patchify: spatial size not divisible by patch");
  int gh = h / patch, gw = w / patch;
  int t = gh * gw, f = c * patch * patch;
  auto in = img.node();
  auto remap = [c, h, w, patch, gh, gw, f](auto&& fn) {
    for (int gy = 0; gy < gh; ++gy)
      for (int gx = 0; gx < gw; ++gx) {
        int tok = gy * gw + gx;
        int idx = 0;
        for (int ch = 0; ch < c; ++ch)
          for (int py = 0; py < patch; ++py)
            for (int px = 0; px < patch; ++px) {
              size_t src = (static_cast<size_t>(ch) * h + gy * patch + py) * w +
                           gx * patch + px;
              fn(static_cast<size_t>(tok) * f + idx, src);
              ++idx;
            }
      }
  };
  auto out = make_op({t, f}, {in}, [remap](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.needs_grad) return;
    x.ensure_grad();
    remap([&](size_t dst, size_t src) { x.grad[src] += self.grad[dst]; });
  });
  remap([&](size_t dst, size_t src) { out->data[dst] = in->data[src]; });
  return Tensor::wrap(out);
}

Tensor tokens_to_grid(const Tensor& tokens, int c, int h, int w) {
  if (tokens.shape().size() != 2 || tokens.dim(0) != h * w || tokens.dim(1) != c)
    throw ShapeError("tokens_to_grid: " + shape_str(tokens.shape()) +
                     " does not reshape to [" + std::to_string(c) + "," +
                     std::to_string(h) + "," + std::to_string(w) + "]");
  auto in = tokens.node();
  auto out = make_op({c, h, w}, {in}, [c, h, w](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.needs_grad) return;
    x.ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < h * w; ++i)
        x.grad[static_cast<size_t>(i) * c + ch] +=
            self.grad[static_cast<size_t>(ch) * h * w + i];
  });
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h * w; ++i)
      out->data[static_cast<size_t>(ch) * h * w + i] =
          in->data[static_cast<size_t>(i) * c + ch];
  return Tensor::wrap(out);
}

Tensor grid_to_tokens(const Tensor& grid) {
  if (grid.shape().size() != 3) throw ShapeError("grid_to_tokens: expects [C,H,W]");
  int c = grid.dim(0), h = grid.dim(1), w = grid.dim(2);
  auto in = grid.node();
  auto out = make_op({h * w, c}, {in}, [c, h, w](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.needs_grad) return;
    x.ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < h * w; ++i)
        x.grad[static_cast<size_t>(ch) * h * w + i] +=
            self.grad[static_cast<size_t>(i) * c + ch];
  });
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h * w; ++i)
      out->data[static_cast<size_t>(i) * c + ch] =
          in->data[static_cast<size_t>(ch) * h * w + i];
  return Tensor::wrap(out);
}

Tensor upsample_nearest2x(const Tensor& grid) {
  if (grid.shape().size() != 3) throw ShapeError("upsample_nearest2x: expects [C,H,W]");
  int c = grid.dim(0), h = grid.dim(1), w = grid.dim(2);
  int oh = 2 * h, ow = 2 * w;
  auto in = grid.node();
  auto out = make_op({c, oh, ow}, {in}, [c, h, w, oh, ow](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.needs_grad) return;
    x.ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx)
          x.grad[(static_cast<size_t>(ch) * h + y / 2) * w + xx / 2] +=
              self.grad[(static_cast<size_t>(ch) * oh + y) * ow + xx];
  });
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx)
        out->data[(static_cast<size_t>(ch) * oh + y) * ow + xx] =
            in->data[(static_cast<size_t>(ch) * h + y / 2) * w + xx / 2];
  return Tensor::wrap(out);
}

namespace {
struct BilinearTap {
  int y0, y1, x0, x1;
  double wy, wx;  // weight of the low index along each axis
};
BilinearTap bilinear_tap(int oy, int ox, int ih, int iw, int oh, int ow) {
  double sy = static_cast<double>(ih) / oh;
  double sx = static_cast<double>(iw) / ow;
  double fy = (oy + 0.5) * sy - 0.5;
  double fx = (ox + 0.5) * sx - 0.5;
  fy = std::clamp(fy, 0.0, static_cast<double>(ih - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(iw - 1));
  BilinearTap t;
  t.y0 = static_cast<int>(fy);
  t.x0 = static_cast<int>(fx);
  t.y1 = std::min(t.y0 + 1, ih - 1);
  t.x1 = std::min(t.x0 + 1, iw - 1);
  t.wy = 1.0 - (fy - t.y0);
  t.wx = 1.0 - (fx - t.x0);
  return t;
}
}  // namespace

Tensor bilinear_resize(const Tensor& grid, int out_h, int out_w) {
  if (grid.shape().size() != 3) throw ShapeError("bilinear_resize: expects [C,H,W]");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("bilinear_resize: bad output size");
  int c = grid.dim(0), h = grid.dim(1), w = grid.dim(2);
  auto in = grid.node();
  auto out = make_op({c, out_h, out_w}, {in}, [c, h, w, out_h, out_w](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.needs_grad) return;
    x.ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      double* xg = x.grad.data() + static_cast<size_t>(ch) * h * w;
      const double* g = self.grad.data() + static_cast<size_t>(ch) * out_h * out_w;
      for (int y = 0; y < out_h; ++y)
        for (int xx = 0; xx < out_w; ++xx) {
          auto t = bilinear_tap(y, xx, h, w, out_h, out_w);
          double gv = g[static_cast<size_t>(y) * out_w + xx];
          xg[static_cast<size_t>(t.y0) * w + t.x0] += gv * t.wy * t.wx;
          xg[static_cast<size_t>(t.y0) * w + t.x1] += gv * t.wy * (1.0 - t.wx);
          xg[static_cast<size_t>(t.y1) * w + t.x0] += gv * (1.0 - t.wy) * t.wx;
          xg[static_cast<size_t>(t.y1) * w + t.x1] += gv * (1.0 - t.wy) * (1.0 - t.wx);
        }
    }
  });
  for (int ch = 0; ch < c; ++ch) {
    const double* xp = in->data.data() + static_cast<size_t>(ch) * h * w;
    double* op = out->data.data() + static_cast<size_t>(ch) * out_h * out_w;
    for (int y = 0; y < out_h; ++y)
      for (int xx = 0; xx < out_w; ++xx) {
        auto t = bilinear_tap(y, xx, h, w, out_h, out_w);
        op[static_cast<size_t>(y) * out_w + xx] =
            t.wy * (t.wx * xp[static_cast<size_t>(t.y0) * w + t.x0] +
                    (1.0 - t.wx) * xp[static_cast<size_t>(t.y0) * w + t.x1]) +
            (1.0 - t.wy) * (t.wx * xp[static_cast<size_t>(t.y1) * w + t.x0] +
                            (1.0 - t.wx) * xp[static_cast<size_t>(t.y1) * w + t.x1]);
      }
  }
  return Tensor::wrap(out);
}

Tensor avgpool(const Tensor& grid, int k) {
  if (grid.shape().size() != 3) throw ShapeError("avgpool: expects [C,H,W]");
  int c = grid.dim(0), h = grid.dim(1), w = grid.dim(2);
  if (k <= 0 || h % k != 0 || w % k != 0)
    throw ShapeError("avgpool: size not divisible by kernel");
  int oh = h / k, ow = w / k;
  double inv = 1.0 / (k * k);
  auto in = grid.node();
  auto out = make_op({c, oh, ow}, {in}, [c, h, w, k, oh, ow, inv](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.needs_grad) return;
    x.ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double gv = self.grad[(static_cast<size_t>(ch) * oh + y) * ow + xx] * inv;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx)
              x.grad[(static_cast<size_t>(ch) * h + y * k + dy) * w + xx * k + dx] += gv;
        }
  });
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        double acc = 0.0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            acc += in->data[(static_cast<size_t>(ch) * h + y * k + dy) * w + xx * k + dx];
        out->data[(static_cast<size_t>(ch) * oh + y) * ow + xx] = acc * inv;
      }
  return Tensor::wrap(out);
}

namespace {

// 3x3 extremum pool with replicate border. Gradient flows to the first
// extremal position in scan order, which keeps backward deterministic.
Tensor extremum_pool3x3(const Tensor& grid, bool take_max) {
  if (grid.shape().size() != 3) throw ShapeError("pool3x3: expects [C,H,W]");
  int c = grid.dim(0), h = grid.dim(1), w = grid.dim(2);
  auto in = grid.node();
  auto argb = std::make_shared<std::vector<int>>(static_cast<size_t>(c) * h * w);
  auto out = make_op({c, h, w}, {in}, [argb](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.needs_grad) return;
    x.ensure_grad();
    const auto& arg = *argb;
    for (size_t i = 0; i < self.data.size(); ++i) x.grad[arg[i]] += self.grad[i];
  });
  for (int ch = 0; ch < c; ++ch) {
    const double* xp = in->data.data() + static_cast<size_t>(ch) * h * w;
    double* op = out->data.data() + static_cast<size_t>(ch) * h * w;
    int* ap = argb->data() + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double best = take_max ? -1e300 : 1e300;
        int besti = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int sy = std::clamp(y + dy, 0, h - 1);
            int sx = std::clamp(xx + dx, 0, w - 1);
            double v = xp[static_cast<size_t>(sy) * w + sx];
            if (take_max ? (v > best) : (v < best)) {
              best = v;
              besti = sy * w + sx;
            }
          }
        op[static_cast<size_t>(y) * w + xx] = best;
        ap[static_cast<size_t>(y) * w + xx] = ch * h * w + besti;
      }
  }
  return Tensor::wrap(out);
}

}  // namespace

Tensor maxpool3x3(const Tensor& grid) { return extremum_pool3x3(grid, true); }
Tensor minpool3x3(const Tensor& grid) { return extremum_pool3x3(grid, false); }

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (numel_of(shape) != a.numel())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape) +
                     " changes element count");
  auto in = a.node();
  auto out = make_op(std::move(shape), {in}, [](Node& self) {
    accum(*self.inputs[0], self.grad.data(), self.data.size());
  });
  out->data = in->data;
  return Tensor::wrap(out);
}

// -------------------------------------------------------------- reductions

Tensor sum(const Tensor& a) {
  auto in = a.node();
  auto out = make_op({1}, {in}, [](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.needs_grad) return;
    x.ensure_grad();
    double g = self.grad[0];
    for (auto& v : x.grad) v += g;
  });
  double acc = 0.0;
  for (double v : in->data) acc += v;
  out->data[0] = acc;
  return Tensor::wrap(out);
}

Tensor mean(const Tensor& a) {
  auto in = a.node();
  double inv = 1.0 / a.numel();
  auto out = make_op({1}, {in}, [inv](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.needs_grad) return;
    x.ensure_grad();
    double g = self.grad[0] * inv;
    for (auto& v : x.grad) v += g;
  });
  double acc = 0.0;
  for (double v : in->data) acc += v;
  out->data[0] = acc * inv;
  return Tensor::wrap(out);
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets, double eps) {
  check_same_shape(logits, targets, "bce_with_logits");
  auto xn = logits.node(), tn = targets.node();
  double inv = 1.0 / logits.numel();
  auto out = make_op({1}, {xn, tn}, [eps, inv](Node& self) {
    Node& x = *self.inputs[0];
    Node& t = *self.inputs[1];
    if (!x.needs_grad) return;
    x.ensure_grad();
    double g = self.grad[0] * inv;
    for (size_t i = 0; i < x.data.size(); ++i) {
      double p = stable_sigmoid(x.data[i]);
      double tv = t.data[i];
      if (p > eps && p < 1.0 - eps) {
        x.grad[i] += g * (p - tv);
      } else {
        double ph = std::clamp(p, eps, 1.0 - eps);
        x.grad[i] += g * p * (1.0 - p) * (-tv / ph + (1.0 - tv) / (1.0 - ph));
      }
    }
  });
  double acc = 0.0;
  for (size_t i = 0; i < xn->data.size(); ++i) {
    double p = std::clamp(stable_sigmoid(xn->data[i]), eps, 1.0 - eps);
    double tv = tn->data[i];
    acc -= tv * std::log(p) + (1.0 - tv) * std::log(1.0 - p);
  }
  out->data[0] = acc * inv;
  return Tensor::wrap(out);
}

Tensor bce_probs(const Tensor& probs, const Tensor& targets, double eps) {
  check_same_shape(probs, targets, "bce_probs");
  auto pn = probs.node(), tn = targets.node();
  double inv = 1.0 / probs.numel();
  auto out = make_op({1}, {pn, tn}, [eps, inv](Node& self) {
    Node& p = *self.inputs[0];
    Node& t = *self.inputs[1];
    if (!p.needs_grad) return;
    p.ensure_grad();
    double g = self.grad[0] * inv;
    for (size_t i = 0; i < p.data.size(); ++i) {
      double pv = p.data[i];
      if (pv > eps && pv < 1.0 - eps)
        p.grad[i] += g * (-t.data[i] / pv + (1.0 - t.data[i]) / (1.0 - pv));
      // clamped region: flat, no gradient
    }
  });
  double acc = 0.0;
  for (size_t i = 0; i < pn->data.size(); ++i) {
    double pv = std::clamp(pn->data[i], eps, 1.0 - eps);
    double tv = tn->data[i];
    acc -= tv * std::log(pv) + (1.0 - tv) * std::log(1.0 - pv);
  }
  out->data[0] = acc * inv;
  return Tensor::wrap(out);
}

// ---------------------------------------------------------------- backward

void backward(const Tensor& loss) {
  if (!loss.defined()) throw AutodiffError("backward: undefined tensor");
  auto root = loss.node();
  if (root->numel() != 1)
    throw AutodiffError("backward: loss must be scalar, got " + shape_str(root->shape));
  if (root->backward_done)
    throw AutodiffError("backward: already called on this loss; build a fresh graph");
  if (!root->needs_grad)
    throw AutodiffError("backward: loss is detached from any trainable parameter");

  // Iterative post-order DFS; the reversed finish order is a valid reverse
  // topological order, and each node is expanded exactly once.
  std::vector<Node*> order;
  std::vector<std::pair<Node*, size_t>> stack;
  struct PtrSet {  // sorted-vector set; graphs are a few thousand nodes
    std::vector<Node*> v;
    bool insert(Node* p) {
      auto it = std::lower_bound(v.begin(), v.end(), p);
      if (it != v.end() && *it == p) return false;
      v.insert(it, p);
      return true;
    }
  } set;

  stack.emplace_back(root.get(), 0);
  set.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* next = node->inputs[idx].get();
      ++idx;
      if (next->needs_grad && set.insert(next)) stack.emplace_back(next, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  root->backward_done = true;
}

uint64_t checksum(const Tensor& t) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (double v : t.data()) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

uint64_t checksum(const std::vector<NamedParam>& params) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : params) {
    uint64_t c = checksum(p.tensor);
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace revi
