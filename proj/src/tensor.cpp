#include "palx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "palx/gemm.hpp"

namespace palx {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

namespace autograd {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

}  // namespace autograd

using autograd::Node;

namespace {

void check_shape(const Shape& s) {
  for (int d : s)
    if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(s));
}

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

// Attaches parents and a backprop closure when any input participates in the
// tape; otherwise the result is a constant leaf.
Tensor finish(std::shared_ptr<Node> out, std::vector<std::shared_ptr<Node>> parents,
              std::function<void(Node&)> backprop) {
  bool rg = false;
  if (autograd::grad_enabled())
    for (const auto& p : parents) rg = rg || p->requires_grad;
  if (rg) {
    out->requires_grad = true;
    out->leaf = false;
    out->parents = std::move(parents);
    out->backprop = std::move(backprop);
  }
  return Tensor(std::move(out));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

void accum_flat(Node& p, const std::vector<double>& g) {
  if (!p.requires_grad) return;
  p.ensure_grad();
  const int64_t n = static_cast<int64_t>(g.size());
  for (int64_t i = 0; i < n; ++i) p.grad[i] += g[i];
}

}  // namespace

// --- Tensor basics --------------------------------------------------------

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  check_shape(shape);
  int64_t n = shape_numel(shape);
  n_ = new_node(std::move(shape), std::vector<double>(n, fill));
  n_->requires_grad = requires_grad && autograd::grad_enabled();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  n_ = new_node(std::move(shape), std::move(data));
  n_->requires_grad = requires_grad && autograd::grad_enabled();
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t(std::move(shape), 0.0, requires_grad);
  rng.fill_normal({t.data(), static_cast<size_t>(t.size())}, 0.0, stddev);
  return t;
}

Node& Tensor::nref() {
  if (!n_) throw StateError("operation on an undefined tensor");
  return *n_;
}
const Node& Tensor::nref() const {
  if (!n_) throw StateError("operation on an undefined tensor");
  return *n_;
}

const Shape& Tensor::shape() const { return nref().shape; }

int Tensor::dim(int i) const {
  int r = rank();
  if (i < 0) i += r;
  if (i < 0 || i >= r)
    throw IndexError("dim index " + std::to_string(i) + " out of range for rank " + std::to_string(r));
  return shape()[i];
}

int64_t Tensor::size() const { return static_cast<int64_t>(nref().value.size()); }

double* Tensor::data() { return nref().value.data(); }
const double* Tensor::data() const { return nref().value.data(); }

double Tensor::item() const {
  if (size() != 1)
    throw ContractError("item() requires a scalar tensor, got shape " + shape_str(shape()));
  return nref().value[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size())
    throw IndexError("at(): expected " + std::to_string(s.size()) + " indices");
  int64_t off = 0;
  int k = 0;
  for (int i : idx) {
    if (i < 0 || i >= s[k]) throw IndexError("at(): index out of range");
    off = off * s[k] + i;
    ++k;
  }
  return nref().value[off];
}

bool Tensor::requires_grad() const { return nref().requires_grad; }

Tensor& Tensor::set_requires_grad(bool rg) {
  if (!nref().leaf) throw ContractError("requires_grad can only be toggled on leaf tensors");
  nref().requires_grad = rg;
  return *this;
}

bool Tensor::is_leaf() const { return nref().leaf; }

bool Tensor::has_grad() const { return !nref().grad.empty(); }

const std::vector<double>& Tensor::grad_ref() const {
  if (!has_grad()) throw StateError("tensor has no gradient populated");
  return nref().grad;
}

Tensor Tensor::grad() const { return Tensor(shape(), grad_ref()); }

void Tensor::zero_grad() { nref().grad.clear(); }

Tensor Tensor::detach() const {
  return Tensor(shape(), nref().value);
}

Tensor Tensor::clone() const { return Tensor(shape(), nref().value); }

void Tensor::fill_(double v) {
  auto& val = nref().value;
  std::fill(val.begin(), val.end(), v);
}

void Tensor::add_scaled_(const std::vector<double>& g, double alpha) {
  auto& val = nref().value;
  if (g.size() != val.size())
    throw DimensionError("add_scaled_: length mismatch");
  for (size_t i = 0; i < val.size(); ++i) val[i] += alpha * g[i];
}

void Tensor::copy_from_(const Tensor& src) {
  require_same_shape(*this, src, "copy_from_");
  nref().value = src.nref().value;
}

void Tensor::backward() {
  Node* root = &nref();
  if (size() != 1)
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(shape()));
  if (!root->requires_grad)
    throw ContractError("backward: loss does not depend on any tensor requiring grad");

  // Reverse post-order DFS gives a topological order with every consumer
  // visited before its producers.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (!n->leaf && n->consumed)
      throw StateError("gradient tape already consumed; build a fresh forward pass before calling backward again");

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) {
      n->backprop(*n);
      n->consumed = true;
    }
  }
}

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return finish(new_node(a.shape(), std::move(out)), {a.node(), b.node()},
                [](Node& self) {
                  accum_flat(*self.parents[0], self.grad);
                  accum_flat(*self.parents[1], self.grad);
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return finish(new_node(a.shape(), std::move(out)), {a.node(), b.node()},
                [](Node& self) {
                  accum_flat(*self.parents[0], self.grad);
                  Node& p = *self.parents[1];
                  if (!p.requires_grad) return;
                  p.ensure_grad();
                  for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] -= self.grad[i];
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return finish(new_node(a.shape(), std::move(out)), {a.node(), b.node()},
                [](Node& self) {
                  Node& pa = *self.parents[0];
                  Node& pb = *self.parents[1];
                  if (pa.requires_grad) {
                    pa.ensure_grad();
                    for (size_t i = 0; i < self.grad.size(); ++i)
                      pa.grad[i] += self.grad[i] * pb.value[i];
                  }
                  if (pb.requires_grad) {
                    pb.ensure_grad();
                    for (size_t i = 0; i < self.grad.size(); ++i)
                      pb.grad[i] += self.grad[i] * pa.value[i];
                  }
                });
}

Tensor scale(const Tensor& a, double c) {
  const auto& av = a.node()->value;
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  return finish(new_node(a.shape(), std::move(out)), {a.node()}, [c](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += c * self.grad[i];
  });
}

Tensor add_n(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ContractError("add_n: empty input list");
  std::vector<double> out = xs[0].node()->value;
  std::vector<std::shared_ptr<Node>> parents{xs[0].node()};
  for (size_t k = 1; k < xs.size(); ++k) {
    require_same_shape(xs[0], xs[k], "add_n");
    const auto& v = xs[k].node()->value;
    for (size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    parents.push_back(xs[k].node());
  }
  return finish(new_node(xs[0].shape(), std::move(out)), std::move(parents),
                [](Node& self) {
                  for (auto& p : self.parents) accum_flat(*p, self.grad);
                });
}

Tensor relu(const Tensor& x) {
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return finish(new_node(x.shape(), std::move(out)), {x.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (p.value[i] > 0.0) p.grad[i] += self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    double v = xv[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return finish(new_node(x.shape(), std::move(out)), {x.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double y = self.value[i];
      p.grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

namespace {
double softplus(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }
double sigmoid_scalar(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}
}  // namespace

Tensor log_sigmoid(const Tensor& x) {
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = -softplus(-xv[i]);
  return finish(new_node(x.shape(), std::move(out)), {x.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      p.grad[i] += self.grad[i] * sigmoid_scalar(-p.value[i]);
  });
}

// --- shape ------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  check_shape(shape);
  if (shape_numel(shape) != x.size())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  return finish(new_node(std::move(shape), x.node()->value), {x.node()},
                [](Node& self) { accum_flat(*self.parents[0], self.grad); });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose expects a 2-D tensor, got " + shape_str(x.shape()));
  int m = x.dim(0), n = x.dim(1);
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  return finish(new_node(Shape{n, m}, std::move(out)), {x.node()}, [m, n](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i) p.grad[i * n + j] += self.grad[j * m + i];
  });
}

namespace {
// Splits a shape at `axis` into [outer, axis_len, inner] extents.
void split_axis(const Shape& s, int axis, int64_t& outer, int64_t& axis_len, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  axis_len = s[axis];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

int normalize_axis(int axis, int rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank)
    throw IndexError(std::string(op) + ": axis out of range for rank " + std::to_string(rank));
  return axis;
}
}  // namespace

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ContractError("concat: empty input list");
  int rank = xs[0].rank();
  axis = normalize_axis(axis, rank, "concat");
  Shape out_shape = xs[0].shape();
  std::vector<int> lens{xs[0].dim(axis)};
  for (size_t k = 1; k < xs.size(); ++k) {
    if (xs[k].rank() != rank)
      throw DimensionError("concat: rank mismatch " + shape_str(xs[0].shape()) + " vs " +
                           shape_str(xs[k].shape()));
    for (int i = 0; i < rank; ++i)
      if (i != axis && xs[k].dim(i) != out_shape[i])
        throw DimensionError("concat: shape mismatch " + shape_str(xs[0].shape()) + " vs " +
                             shape_str(xs[k].shape()));
    lens.push_back(xs[k].dim(axis));
    out_shape[axis] += xs[k].dim(axis);
  }
  int64_t outer, total_axis, inner;
  split_axis(out_shape, axis, outer, total_axis, inner);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::shared_ptr<Node>> parents;
  int64_t off = 0;
  for (size_t k = 0; k < xs.size(); ++k) {
    const auto& v = xs[k].node()->value;
    int64_t block = lens[k] * inner;
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(out.data() + o * total_axis * inner + off * inner, v.data() + o * block,
                  block * sizeof(double));
    parents.push_back(xs[k].node());
    off += lens[k];
  }
  return finish(new_node(out_shape, std::move(out)), std::move(parents),
                [lens, outer, total_axis, inner](Node& self) {
                  int64_t off = 0;
                  for (size_t k = 0; k < self.parents.size(); ++k) {
                    Node& p = *self.parents[k];
                    int64_t block = lens[k] * inner;
                    if (p.requires_grad) {
                      p.ensure_grad();
                      for (int64_t o = 0; o < outer; ++o) {
                        const double* g = self.grad.data() + o * total_axis * inner + off * inner;
                        double* pg = p.grad.data() + o * block;
                        for (int64_t i = 0; i < block; ++i) pg[i] += g[i];
                      }
                    }
                    off += lens[k];
                  }
                });
}

Tensor slice(const Tensor& x, int axis, int start, int len) {
  axis = normalize_axis(axis, x.rank(), "slice");
  if (start < 0 || len <= 0 || start + len > x.dim(axis))
    throw ContractError("slice: range [" + std::to_string(start) + "," +
                        std::to_string(start + len) + ") out of bounds for axis length " +
                        std::to_string(x.dim(axis)));
  int64_t outer, axis_len, inner;
  split_axis(x.shape(), axis, outer, axis_len, inner);
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  std::vector<double> out(outer * len * inner);
  const auto& xv = x.node()->value;
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(out.data() + o * len * inner, xv.data() + (o * axis_len + start) * inner,
                len * inner * sizeof(double));
  return finish(new_node(out_shape, std::move(out)), {x.node()},
                [outer, axis_len, inner, start, len](Node& self) {
                  Node& p = *self.parents[0];
                  if (!p.requires_grad) return;
                  p.ensure_grad();
                  for (int64_t o = 0; o < outer; ++o) {
                    const double* g = self.grad.data() + o * len * inner;
                    double* pg = p.grad.data() + (o * axis_len + start) * inner;
                    for (int64_t i = 0; i < len * inner; ++i) pg[i] += g[i];
                  }
                });
}

// --- reductions ---------------------------------------------------------

Tensor sum(const Tensor& x) {
  const auto& xv = x.node()->value;
  double acc = 0.0;
  for (double v : xv) acc += v;
  return finish(new_node(Shape{1}, {acc}), {x.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    double g = self.grad[0];
    for (double& pg : p.grad) pg += g;
  });
}

Tensor mean(const Tensor& x) {
  const auto& xv = x.node()->value;
  double acc = 0.0;
  for (double v : xv) acc += v;
  double inv = 1.0 / static_cast<double>(xv.size());
  return finish(new_node(Shape{1}, {acc * inv}), {x.node()}, [inv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    double g = self.grad[0] * inv;
    for (double& pg : p.grad) pg += g;
  });
}

// --- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul expects 2-D tensors, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  std::vector<double> out(static_cast<int64_t>(m) * n, 0.0);
  detail::gemm(false, false, m, n, k, 1.0, a.data(), k, b.data(), n, 0.0, out.data(), n);
  return finish(new_node(Shape{m, n}, std::move(out)), {a.node(), b.node()},
                [m, n, k](Node& self) {
                  Node& pa = *self.parents[0];
                  Node& pb = *self.parents[1];
                  if (pa.requires_grad) {
                    pa.ensure_grad();
                    // dA += G * B^T
                    detail::gemm(false, true, m, k, n, 1.0, self.grad.data(), n,
                                 pb.value.data(), n, 1.0, pa.grad.data(), k);
                  }
                  if (pb.requires_grad) {
                    pb.ensure_grad();
                    // dB += A^T * G
                    detail::gemm(true, false, k, n, m, 1.0, pa.value.data(), k,
                                 self.grad.data(), n, 1.0, pb.grad.data(), n);
                  }
                });
}

Tensor add_bias_rows(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
    throw DimensionError("add_bias_rows: incompatible shapes " + shape_str(x.shape()) +
                         " and " + shape_str(bias.shape()));
  int rows = x.dim(0), cols = x.dim(1);
  const auto& xv = x.node()->value;
  const auto& bv = bias.node()->value;
  std::vector<double> out(xv.size());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[r * cols + c] = xv[r * cols + c] + bv[c];
  return finish(new_node(x.shape(), std::move(out)), {x.node(), bias.node()},
                [rows, cols](Node& self) {
                  Node& px = *self.parents[0];
                  Node& pb = *self.parents[1];
                  if (px.requires_grad) accum_flat(px, self.grad);
                  if (pb.requires_grad) {
                    pb.ensure_grad();
                    for (int r = 0; r < rows; ++r)
                      for (int c = 0; c < cols; ++c) pb.grad[c] += self.grad[r * cols + c];
                  }
                });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  if (b.defined()) y = add_bias_rows(y, b);
  return y;
}

// --- conv / pooling ---------------------------------------------------------

namespace {

struct ConvDims {
  int n, c, h, w;        // input
  int co, kh, kw;        // kernel
  int stride, pad;
  int ho, wo;            // output
  int64_t k() const { return static_cast<int64_t>(c) * kh * kw; }
  int64_t cols() const { return static_cast<int64_t>(ho) * wo; }
};

// Unpacks one sample's receptive fields into a [C*kh*kw, Ho*Wo] matrix.
void im2col(const double* x, const ConvDims& d, double* cols) {
  const int64_t plane = static_cast<int64_t>(d.h) * d.w;
  for (int ci = 0; ci < d.c; ++ci) {
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        double* row = cols + ((static_cast<int64_t>(ci) * d.kh + ky) * d.kw + kx) * d.cols();
        for (int y = 0; y < d.ho; ++y) {
          int iy = y * d.stride + ky - d.pad;
          double* out = row + static_cast<int64_t>(y) * d.wo;
          if (iy < 0 || iy >= d.h) {
            std::fill(out, out + d.wo, 0.0);
            continue;
          }
          const double* src = x + ci * plane + static_cast<int64_t>(iy) * d.w;
          if (d.stride == 1) {
            int x0 = std::max(0, d.pad - kx);
            int x1 = std::min(d.wo, d.w + d.pad - kx);
            if (x0 > 0) std::fill(out, out + x0, 0.0);
            if (x1 > x0) std::memcpy(out + x0, src + x0 + kx - d.pad, (x1 - x0) * sizeof(double));
            if (x1 < d.wo) std::fill(out + std::max(x0, x1), out + d.wo, 0.0);
          } else {
            for (int xo = 0; xo < d.wo; ++xo) {
              int ix = xo * d.stride + kx - d.pad;
              out[xo] = (ix >= 0 && ix < d.w) ? src[ix] : 0.0;
            }
          }
        }
      }
    }
  }
}

// Scatter-adds a [C*kh*kw, Ho*Wo] gradient matrix back onto the input plane.
void col2im_add(const double* cols, const ConvDims& d, double* dx) {
  const int64_t plane = static_cast<int64_t>(d.h) * d.w;
  for (int ci = 0; ci < d.c; ++ci) {
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const double* row = cols + ((static_cast<int64_t>(ci) * d.kh + ky) * d.kw + kx) * d.cols();
        for (int y = 0; y < d.ho; ++y) {
          int iy = y * d.stride + ky - d.pad;
          if (iy < 0 || iy >= d.h) continue;
          double* dst = dx + ci * plane + static_cast<int64_t>(iy) * d.w;
          const double* src = row + static_cast<int64_t>(y) * d.wo;
          for (int xo = 0; xo < d.wo; ++xo) {
            int ix = xo * d.stride + kx - d.pad;
            if (ix >= 0 && ix < d.w) dst[ix] += src[xo];
          }
        }
      }
    }
  }
}

thread_local std::vector<double> g_col_scratch;

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
  if (x.rank() != 4 || w.rank() != 4)
    throw DimensionError("conv2d expects NCHW input and [Co,C,kh,kw] kernel, got " +
                         shape_str(x.shape()) + " and " + shape_str(w.shape()));
  if (x.dim(1) != w.dim(1))
    throw DimensionError("conv2d: channel mismatch between input " + shape_str(x.shape()) +
                         " and kernel " + shape_str(w.shape()));
  if (stride < 1 || padding < 0) throw ContractError("conv2d: invalid stride/padding");
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3),
             w.dim(0), w.dim(2), w.dim(3), stride, padding, 0, 0};
  d.ho = (d.h + 2 * padding - d.kh) / stride + 1;
  d.wo = (d.w + 2 * padding - d.kw) / stride + 1;
  if (d.ho <= 0 || d.wo <= 0)
    throw DimensionError("conv2d: kernel larger than padded input");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != d.co))
    throw DimensionError("conv2d: bias shape " + shape_str(bias.shape()) +
                         " does not match output channels " + std::to_string(d.co));

  const int64_t in_plane = static_cast<int64_t>(d.c) * d.h * d.w;
  const int64_t out_plane = static_cast<int64_t>(d.co) * d.cols();
  std::vector<double> out(static_cast<int64_t>(d.n) * out_plane);
  g_col_scratch.resize(d.k() * d.cols());
  for (int s = 0; s < d.n; ++s) {
    im2col(x.data() + s * in_plane, d, g_col_scratch.data());
    detail::gemm(false, false, d.co, static_cast<int>(d.cols()), static_cast<int>(d.k()), 1.0,
                 w.data(), static_cast<int>(d.k()), g_col_scratch.data(),
                 static_cast<int>(d.cols()), 0.0, out.data() + s * out_plane,
                 static_cast<int>(d.cols()));
  }
  if (bias.defined()) {
    const double* bv = bias.data();
    for (int s = 0; s < d.n; ++s)
      for (int co = 0; co < d.co; ++co) {
        double* row = out.data() + s * out_plane + co * d.cols();
        for (int64_t i = 0; i < d.cols(); ++i) row[i] += bv[co];
      }
  }

  std::vector<std::shared_ptr<Node>> parents{x.node(), w.node()};
  if (bias.defined()) parents.push_back(bias.node());
  return finish(
      new_node(Shape{d.n, d.co, d.ho, d.wo}, std::move(out)), std::move(parents),
      [d, in_plane, out_plane](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
        if (px.requires_grad) px.ensure_grad();
        if (pw.requires_grad) pw.ensure_grad();
        if (pb && pb->requires_grad) pb->ensure_grad();

        std::vector<double> dcols;
        if (px.requires_grad) dcols.resize(d.k() * d.cols());
        for (int s = 0; s < d.n; ++s) {
          const double* g = self.grad.data() + s * out_plane;
          if (pw.requires_grad || px.requires_grad)
            g_col_scratch.resize(d.k() * d.cols());
          if (pw.requires_grad) {
            im2col(px.value.data() + s * in_plane, d, g_col_scratch.data());
            // dW += G * cols^T
            detail::gemm(false, true, d.co, static_cast<int>(d.k()),
                         static_cast<int>(d.cols()), 1.0, g, static_cast<int>(d.cols()),
                         g_col_scratch.data(), static_cast<int>(d.cols()), 1.0,
                         pw.grad.data(), static_cast<int>(d.k()));
          }
          if (px.requires_grad) {
            // dcols = W^T * G, then scatter back to the input plane
            detail::gemm(true, false, static_cast<int>(d.k()), static_cast<int>(d.cols()),
                         d.co, 1.0, pw.value.data(), static_cast<int>(d.k()), g,
                         static_cast<int>(d.cols()), 0.0, dcols.data(),
                         static_cast<int>(d.cols()));
            col2im_add(dcols.data(), d, px.grad.data() + s * in_plane);
          }
          if (pb && pb->requires_grad)
            for (int co = 0; co < d.co; ++co) {
              const double* row = g + co * d.cols();
              double acc = 0.0;
              for (int64_t i = 0; i < d.cols(); ++i) acc += row[i];
              pb->grad[co] += acc;
            }
        }
      });
}

Tensor avg_pool2x2(const Tensor& x) {
  if (x.rank() != 4) throw DimensionError("avg_pool2x2 expects NCHW input, got " + shape_str(x.shape()));
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2)
    throw DimensionError("avg_pool2x2: spatial dims must be even, got " + shape_str(x.shape()));
  int ho = h / 2, wo = w / 2;
  const auto& xv = x.node()->value;
  std::vector<double> out(static_cast<int64_t>(n) * c * ho * wo);
  for (int64_t p = 0; p < static_cast<int64_t>(n) * c; ++p) {
    const double* src = xv.data() + p * h * w;
    double* dst = out.data() + p * ho * wo;
    for (int y = 0; y < ho; ++y)
      for (int xq = 0; xq < wo; ++xq)
        dst[y * wo + xq] = 0.25 * (src[(2 * y) * w + 2 * xq] + src[(2 * y) * w + 2 * xq + 1] +
                                   src[(2 * y + 1) * w + 2 * xq] + src[(2 * y + 1) * w + 2 * xq + 1]);
  }
  return finish(new_node(Shape{n, c, ho, wo}, std::move(out)), {x.node()},
                [n, c, h, w, ho, wo](Node& self) {
                  Node& p = *self.parents[0];
                  if (!p.requires_grad) return;
                  p.ensure_grad();
                  for (int64_t pl = 0; pl < static_cast<int64_t>(n) * c; ++pl) {
                    const double* g = self.grad.data() + pl * ho * wo;
                    double* dst = p.grad.data() + pl * h * w;
                    for (int y = 0; y < ho; ++y)
                      for (int xq = 0; xq < wo; ++xq) {
                        double v = 0.25 * g[y * wo + xq];
                        dst[(2 * y) * w + 2 * xq] += v;
                        dst[(2 * y) * w + 2 * xq + 1] += v;
                        dst[(2 * y + 1) * w + 2 * xq] += v;
                        dst[(2 * y + 1) * w + 2 * xq + 1] += v;
                      }
                  }
                });
}

// --- normalization ------------------------------------------------------

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training, double eps, double momentum) {
  if (x.rank() != 4) throw DimensionError("batch_norm expects NCHW input, got " + shape_str(x.shape()));
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c)
    throw DimensionError("batch_norm: gamma/beta length must match channel count " +
                         std::to_string(c));
  if (!state.running_mean.defined()) {
    state.running_mean = Tensor(Shape{c}, 0.0);
    state.running_var = Tensor(Shape{c}, 1.0);
  }
  const int64_t plane = static_cast<int64_t>(h) * w;
  const int64_t per_c = static_cast<int64_t>(n) * plane;
  const auto& xv = x.node()->value;

  std::vector<double> mean_v(c), istd_v(c);
  for (int ci = 0; ci < c; ++ci) {
    double m = 0.0;
    for (int s = 0; s < n; ++s) {
      const double* src = xv.data() + (static_cast<int64_t>(s) * c + ci) * plane;
      for (int64_t i = 0; i < plane; ++i) m += src[i];
    }
    m /= static_cast<double>(per_c);
    double var = 0.0;
    for (int s = 0; s < n; ++s) {
      const double* src = xv.data() + (static_cast<int64_t>(s) * c + ci) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        double dv = src[i] - m;
        var += dv * dv;
      }
    }
    var /= static_cast<double>(per_c);
    mean_v[ci] = m;
    istd_v[ci] = 1.0 / std::sqrt(var + eps);
    if (training) {
      double* rm = state.running_mean.data();
      double* rv = state.running_var.data();
      rm[ci] = momentum * rm[ci] + (1.0 - momentum) * m;
      rv[ci] = momentum * rv[ci] + (1.0 - momentum) * var;
    }
  }

  const double* gv = gamma.data();
  const double* bv = beta.data();
  std::vector<double> out(xv.size());
  for (int s = 0; s < n; ++s)
    for (int ci = 0; ci < c; ++ci) {
      const double* src = xv.data() + (static_cast<int64_t>(s) * c + ci) * plane;
      double* dst = out.data() + (static_cast<int64_t>(s) * c + ci) * plane;
      double a = gv[ci] * istd_v[ci];
      double b = bv[ci] - a * mean_v[ci];
      for (int64_t i = 0; i < plane; ++i) dst[i] = a * src[i] + b;
    }

  return finish(
      new_node(x.shape(), std::move(out)), {x.node(), gamma.node(), beta.node()},
      [n, c, plane, per_c, mean_v, istd_v](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const double* gv = pg.value.data();
        // Per-channel reductions of g and g*xhat are shared by all three grads.
        std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
        for (int s = 0; s < n; ++s)
          for (int ci = 0; ci < c; ++ci) {
            const double* g = self.grad.data() + (static_cast<int64_t>(s) * c + ci) * plane;
            const double* xsrc = px.value.data() + (static_cast<int64_t>(s) * c + ci) * plane;
            double m = mean_v[ci], is = istd_v[ci];
            double a = 0.0, b = 0.0;
            for (int64_t i = 0; i < plane; ++i) {
              a += g[i];
              b += g[i] * (xsrc[i] - m) * is;
            }
            sum_g[ci] += a;
            sum_gx[ci] += b;
          }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (int ci = 0; ci < c; ++ci) pb.grad[ci] += sum_g[ci];
        }
        if (pg.requires_grad) {
          pg.ensure_grad();
          for (int ci = 0; ci < c; ++ci) pg.grad[ci] += sum_gx[ci];
        }
        if (px.requires_grad) {
          px.ensure_grad();
          double inv_m = 1.0 / static_cast<double>(per_c);
          for (int s = 0; s < n; ++s)
            for (int ci = 0; ci < c; ++ci) {
              const double* g = self.grad.data() + (static_cast<int64_t>(s) * c + ci) * plane;
              const double* xsrc = px.value.data() + (static_cast<int64_t>(s) * c + ci) * plane;
              double* dx = px.grad.data() + (static_cast<int64_t>(s) * c + ci) * plane;
              double m = mean_v[ci], is = istd_v[ci], ga = gv[ci];
              double c1 = sum_g[ci] * inv_m;
              double c2 = sum_gx[ci] * inv_m;
              for (int64_t i = 0; i < plane; ++i) {
                double xhat = (xsrc[i] - m) * is;
                dx[i] += ga * is * (g[i] - c1 - xhat * c2);
              }
            }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() != 2) throw DimensionError("layer_norm expects [rows, d] input, got " + shape_str(x.shape()));
  int rows = x.dim(0), d = x.dim(1);
  if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 || beta.dim(0) != d)
    throw DimensionError("layer_norm: gamma/beta length must be " + std::to_string(d));
  const auto& xv = x.node()->value;
  const double* gv = gamma.data();
  const double* bv = beta.data();
  std::vector<double> out(xv.size());
  std::vector<double> mean_v(rows), istd_v(rows);
  for (int r = 0; r < rows; ++r) {
    const double* src = xv.data() + static_cast<int64_t>(r) * d;
    double m = 0.0;
    for (int i = 0; i < d; ++i) m += src[i];
    m /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      double dv = src[i] - m;
      var += dv * dv;
    }
    var /= d;
    double is = 1.0 / std::sqrt(var + eps);
    mean_v[r] = m;
    istd_v[r] = is;
    double* dst = out.data() + static_cast<int64_t>(r) * d;
    for (int i = 0; i < d; ++i) dst[i] = gv[i] * (src[i] - m) * is + bv[i];
  }
  return finish(
      new_node(x.shape(), std::move(out)), {x.node(), gamma.node(), beta.node()},
      [rows, d, mean_v, istd_v](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        const double* gv = pg.value.data();
        if (pg.requires_grad) pg.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        if (px.requires_grad) px.ensure_grad();
        for (int r = 0; r < rows; ++r) {
          const double* g = self.grad.data() + static_cast<int64_t>(r) * d;
          const double* src = px.value.data() + static_cast<int64_t>(r) * d;
          double m = mean_v[r], is = istd_v[r];
          double mean_gg = 0.0, mean_ggx = 0.0;
          for (int i = 0; i < d; ++i) {
            double xhat = (src[i] - m) * is;
            double gg = g[i] * gv[i];
            mean_gg += gg;
            mean_ggx += gg * xhat;
            if (pg.requires_grad) pg.grad[i] += g[i] * xhat;
            if (pb.requires_grad) pb.grad[i] += g[i];
          }
          if (!px.requires_grad) continue;
          mean_gg /= d;
          mean_ggx /= d;
          double* dx = px.grad.data() + static_cast<int64_t>(r) * d;
          for (int i = 0; i < d; ++i) {
            double xhat = (src[i] - m) * is;
            double gg = g[i] * gv[i];
            dx[i] += is * (gg - mean_gg - xhat * mean_ggx);
          }
        }
      });
}

// --- softmax family ---------------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
  axis = normalize_axis(axis, x.rank(), "softmax");
  int64_t outer, axis_len, inner;
  split_axis(x.shape(), axis, outer, axis_len, inner);
  const auto& xv = x.node()->value;
  std::vector<double> out(xv.size());
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t in = 0; in < inner; ++in) {
      const double* src = xv.data() + o * axis_len * inner + in;
      double* dst = out.data() + o * axis_len * inner + in;
      double mx = src[0];
      for (int64_t a = 1; a < axis_len; ++a) mx = std::max(mx, src[a * inner]);
      double total = 0.0;
      for (int64_t a = 0; a < axis_len; ++a) {
        double e = std::exp(src[a * inner] - mx);
        dst[a * inner] = e;
        total += e;
      }
      double norm = 1.0 / total;
      for (int64_t a = 0; a < axis_len; ++a) dst[a * inner] *= norm;
    }
  return finish(new_node(x.shape(), std::move(out)), {x.node()},
                [outer, axis_len, inner](Node& self) {
                  Node& p = *self.parents[0];
                  if (!p.requires_grad) return;
                  p.ensure_grad();
                  for (int64_t o = 0; o < outer; ++o)
                    for (int64_t in = 0; in < inner; ++in) {
                      const double* y = self.value.data() + o * axis_len * inner + in;
                      const double* g = self.grad.data() + o * axis_len * inner + in;
                      double* dx = p.grad.data() + o * axis_len * inner + in;
                      double dot = 0.0;
                      for (int64_t a = 0; a < axis_len; ++a) dot += g[a * inner] * y[a * inner];
                      for (int64_t a = 0; a < axis_len; ++a)
                        dx[a * inner] += y[a * inner] * (g[a * inner] - dot);
                    }
                });
}

Tensor masked_softmax_rows(const Tensor& scores, const std::vector<uint8_t>& allow) {
  if (scores.rank() != 2)
    throw DimensionError("masked_softmax_rows expects 2-D scores, got " + shape_str(scores.shape()));
  int rows = scores.dim(0), cols = scores.dim(1);
  if (static_cast<int64_t>(allow.size()) != static_cast<int64_t>(rows) * cols)
    throw ContractError("masked_softmax_rows: mask size does not match scores " +
                        shape_str(scores.shape()));
  const auto& xv = scores.node()->value;
  std::vector<double> out(xv.size(), 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* src = xv.data() + static_cast<int64_t>(r) * cols;
    const uint8_t* mrow = allow.data() + static_cast<int64_t>(r) * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cols; ++c)
      if (mrow[c]) mx = std::max(mx, src[c]);
    if (!std::isfinite(mx))
      throw ContractError("masked_softmax_rows: row " + std::to_string(r) +
                          " is fully masked (softmax would be NaN)");
    double total = 0.0;
    double* dst = out.data() + static_cast<int64_t>(r) * cols;
    for (int c = 0; c < cols; ++c)
      if (mrow[c]) {
        double e = std::exp(src[c] - mx);
        dst[c] = e;
        total += e;
      }
    double norm = 1.0 / total;
    for (int c = 0; c < cols; ++c) dst[c] *= norm;  // masked cells stay exactly 0
  }
  return finish(new_node(scores.shape(), std::move(out)), {scores.node()},
                [rows, cols](Node& self) {
                  Node& p = *self.parents[0];
                  if (!p.requires_grad) return;
                  p.ensure_grad();
                  for (int r = 0; r < rows; ++r) {
                    const double* y = self.value.data() + static_cast<int64_t>(r) * cols;
                    const double* g = self.grad.data() + static_cast<int64_t>(r) * cols;
                    double* dx = p.grad.data() + static_cast<int64_t>(r) * cols;
                    double dot = 0.0;
                    for (int c = 0; c < cols; ++c) dot += g[c] * y[c];
                    for (int c = 0; c < cols; ++c) dx[c] += y[c] * (g[c] - dot);
                  }
                });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  if (logits.rank() != 2)
    throw DimensionError("cross_entropy expects [L, V] logits, got " + shape_str(logits.shape()));
  int rows = logits.dim(0), v = logits.dim(1);
  if (static_cast<int>(targets.size()) != rows)
    throw ContractError("cross_entropy: got " + std::to_string(targets.size()) +
                        " targets for " + std::to_string(rows) + " logit rows");
  for (int t : targets)
    if (t < 0 || t >= v)
      throw IndexError("cross_entropy: target id " + std::to_string(t) +
                       " out of range for vocabulary size " + std::to_string(v));
  const auto& xv = logits.node()->value;
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* src = xv.data() + static_cast<int64_t>(r) * v;
    double mx = src[0];
    for (int c = 1; c < v; ++c) mx = std::max(mx, src[c]);
    double total = 0.0;
    for (int c = 0; c < v; ++c) total += std::exp(src[c] - mx);
    loss += mx + std::log(total) - src[targets[r]];
  }
  loss /= rows;
  return finish(new_node(Shape{1}, {loss}), {logits.node()}, [rows, v, targets](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    double g0 = self.grad[0] / rows;
    for (int r = 0; r < rows; ++r) {
      const double* src = p.value.data() + static_cast<int64_t>(r) * v;
      double* dx = p.grad.data() + static_cast<int64_t>(r) * v;
      double mx = src[0];
      for (int c = 1; c < v; ++c) mx = std::max(mx, src[c]);
      double total = 0.0;
      for (int c = 0; c < v; ++c) total += std::exp(src[c] - mx);
      double inv = 1.0 / total;
      for (int c = 0; c < v; ++c) dx[c] += g0 * (std::exp(src[c] - mx) * inv);
      dx[targets[r]] -= g0;
    }
  });
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2)
    throw DimensionError("embedding expects a [V, d] table, got " + shape_str(table.shape()));
  int v = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw ContractError("embedding: empty id sequence");
  for (int id : ids)
    if (id < 0 || id >= v)
      throw IndexError("embedding: token id " + std::to_string(id) +
                       " out of range for table size " + std::to_string(v));
  int rows = static_cast<int>(ids.size());
  const auto& tv = table.node()->value;
  std::vector<double> out(static_cast<int64_t>(rows) * d);
  for (int r = 0; r < rows; ++r)
    std::memcpy(out.data() + static_cast<int64_t>(r) * d,
                tv.data() + static_cast<int64_t>(ids[r]) * d, d * sizeof(double));
  return finish(new_node(Shape{rows, d}, std::move(out)), {table.node()},
                [rows, d, ids](Node& self) {
                  Node& p = *self.parents[0];
                  if (!p.requires_grad) return;
                  p.ensure_grad();
                  for (int r = 0; r < rows; ++r) {
                    const double* g = self.grad.data() + static_cast<int64_t>(r) * d;
                    double* dst = p.grad.data() + static_cast<int64_t>(ids[r]) * d;
                    for (int i = 0; i < d; ++i) dst[i] += g[i];
                  }
                });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout probability must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const auto& xv = x.node()->value;
  double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(xv.size());
  for (double& m : mask) m = rng.uniform() >= p ? keep_scale : 0.0;
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * mask[i];
  return finish(new_node(x.shape(), std::move(out)), {x.node()},
                [mask = std::move(mask)](Node& self) {
                  Node& p = *self.parents[0];
                  if (!p.requires_grad) return;
                  p.ensure_grad();
                  for (size_t i = 0; i < self.grad.size(); ++i)
                    p.grad[i] += self.grad[i] * mask[i];
                });
}

}  // namespace palx
