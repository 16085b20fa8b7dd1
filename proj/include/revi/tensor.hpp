#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace revi {

class SeedStream;

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AutodiffError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string shape_str(const std::vector<int>& shape);

namespace detail {

// One entry of the computation tape. The graph of Node objects *is* the
// tape: inputs point backwards, and backward() replays the recorded
// closures in reverse topological order exactly once.
struct Node {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, same length as data

  bool is_leaf = true;
  bool requires_grad = false;  // leaf accumulates gradient
  bool needs_grad = false;     // some ancestor leaf requires gradient
  bool backward_done = false;  // set on the loss root after backward()

  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;

  int numel() const { return static_cast<int>(data.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Dense double-precision tensor. Copying a Tensor copies the handle, not
// the buffer; math ops always allocate fresh output nodes. A tensor made
// by a constant constructor never accumulates gradient.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor uniform(std::vector<int> shape, double lo, double hi, SeedStream& rng,
                        bool requires_grad = false);
  static Tensor normal(std::vector<int> shape, double stddev, SeedStream& rng,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int numel() const;
  int dim(int i) const { return shape().at(static_cast<size_t>(i)); }
  bool is_scalar() const { return numel() == 1; }

  bool requires_grad() const;
  void set_requires_grad(bool value);  // leaves only

  double item() const;  // scalar tensors only
  // Views into the shared buffer; calling them on a temporary would dangle,
  // so bind the tensor to a variable first.
  std::span<const double> data() const&;
  std::span<const double> data() && = delete;
  std::span<double> mutable_data() &;  // leaves only (optimizer updates)
  const std::vector<double>* grad() const&;  // nullptr when absent
  const std::vector<double>* grad() && = delete;
  void zero_grad() const;  // drops the grad buffer on the shared node

  std::shared_ptr<detail::Node> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
  bool frozen() const { return !tensor.requires_grad(); }
};

// ---- elementwise / scalar ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// out = a * s where s is a [1] tensor (learnable scalar coefficient).
Tensor scale(const Tensor& a, const Tensor& s);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a x b^T, b is [n,k]
Tensor transpose2d(const Tensor& a);
Tensor slice_cols(const Tensor& a, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor softmax_rows(const Tensor& a);
Tensor add_row_bias(const Tensor& a, const Tensor& bias);  // bias over last dim
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
// Scaled dot-product attention over [T,d] inputs, d divisible by heads.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads);

// ---- spatial ----
// x [Cin,H,W], w [Cout,Cin,kh,kw] (odd kernel), bias [Cout]; stride 1,
// zero padding, output spatial size preserved.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor patchify(const Tensor& img, int patch);            // [C,H,W] -> [T, C*p*p]
Tensor tokens_to_grid(const Tensor& tokens, int c, int h, int w);
Tensor grid_to_tokens(const Tensor& grid);                // [C,H,W] -> [H*W, C]
Tensor upsample_nearest2x(const Tensor& grid);
Tensor bilinear_resize(const Tensor& grid, int out_h, int out_w);
Tensor avgpool(const Tensor& grid, int k);                // stride == k
Tensor maxpool3x3(const Tensor& grid);                    // stride 1, replicate border
Tensor minpool3x3(const Tensor& grid);
Tensor reshape(const Tensor& a, std::vector<int> shape);

// ---- reductions / losses ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Mean sigmoid binary cross entropy with probability clamping at eps.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets, double eps = 1e-7);
// Same loss when the prediction is already a probability map.
Tensor bce_probs(const Tensor& probs, const Tensor& targets, double eps = 1e-7);

// Reverse-mode sweep from a scalar loss. Populates grad on every reachable
// leaf with requires_grad; calling twice on the same loss node throws.
void backward(const Tensor& loss);

uint64_t checksum(const Tensor& t);
uint64_t checksum(const std::vector<NamedParam>& params);

}  // namespace revi
