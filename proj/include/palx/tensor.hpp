#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "palx/errors.hpp"
#include "palx/random.hpp"

namespace palx {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace autograd {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;  // interior node already used by a backward pass
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

bool grad_enabled();

// Disables tape recording for the guard's lifetime (thread-local).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

}  // namespace autograd

// Dense row-major float64 tensor participating in a dynamic, single-use
// gradient tape. Value-semantic handle: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<autograd::Node> node) : n_(std::move(node)) {}

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int i) const;  // negative i counts from the back
  int64_t size() const;

  double* data();
  const double* data() const;
  double item() const;  // scalar tensors only
  double at(std::initializer_list<int> idx) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool rg);  // leaf tensors only
  bool is_leaf() const;

  bool has_grad() const;
  const std::vector<double>& grad_ref() const;  // throws if absent
  Tensor grad() const;                          // copy as a plain tensor
  void zero_grad();

  // Reverse-mode sweep from a scalar loss. The tape is single-use: a second
  // backward through any already-consumed interior node raises StateError.
  void backward();

  Tensor detach() const;  // leaf copy sharing no graph history
  Tensor clone() const;   // leaf deep copy (value only)

  // In-place helpers for parameter maintenance; never recorded on the tape.
  void fill_(double v);
  void add_scaled_(const std::vector<double>& g, double alpha);
  void copy_from_(const Tensor& src);

  const std::shared_ptr<autograd::Node>& node() const { return n_; }

 private:
  std::shared_ptr<autograd::Node> n_;
  autograd::Node& nref();
  const autograd::Node& nref() const;
};

// --- elementwise / arithmetic -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_n(const std::vector<Tensor>& xs);  // n-ary same-shape sum
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// log(sigmoid(x)), computed as -softplus(-x) so saturated inputs stay finite.
Tensor log_sigmoid(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

// --- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);  // 2-D
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& x, int axis, int start, int len);

// --- reductions -------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// --- linear algebra -----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);             // [m,k]x[k,n]
Tensor add_bias_rows(const Tensor& x, const Tensor& bias);   // [L,d] + [d]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // xw (+b)

// --- neural-net ops -----------------------------------------------------

// Cross-correlation, NCHW layout, zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding);
Tensor avg_pool2x2(const Tensor& x);

// Running statistics owned by the layer, updated only in training mode.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
};

// Normalizes by the statistics of the current batch in BOTH modes, so single-
// image pipelines see identical normalization in training and inference
// (with N=1 this is instance normalization). `training` only controls whether
// the running aggregates are updated; they are carried as diagnostics.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training, double eps = 1e-5,
                  double momentum = 0.9);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor softmax(const Tensor& x, int axis);

// Row-wise softmax over [rows, cols] scores where allow[r*cols+c] == 0 marks a
// masked-out cell; masked probabilities are exactly zero. A fully masked row
// is a contract violation (it would produce NaN).
Tensor masked_softmax_rows(const Tensor& scores, const std::vector<uint8_t>& allow);

// Mean over rows of -log softmax(logits)[row, target[row]].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

Tensor embedding(const Tensor& table, const std::vector<int>& ids);

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

}  // namespace palx
