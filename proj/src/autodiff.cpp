// SPDX-License-Identifier: Apache-2.0
#include "tgcn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tgcn/errors.hpp"

namespace tgcn::ad {
namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

thread_local bool g_grad_enabled = true;

ConstMap view(const Node& n) {
  return ConstMap(n.value.data(), static_cast<Eigen::Index>(n.shape.rows),
                  static_cast<Eigen::Index>(n.shape.cols));
}
ConstMap grad_view(const Node& n) {
  return ConstMap(n.grad.data(), static_cast<Eigen::Index>(n.shape.rows),
                  static_cast<Eigen::Index>(n.shape.cols));
}
MutMap grad_mut(Node& n) {
  auto& g = n.ensure_grad();
  return MutMap(g.data(), static_cast<Eigen::Index>(n.shape.rows),
                static_cast<Eigen::Index>(n.shape.cols));
}

std::shared_ptr<Node> make_leaf(Shape shape, Buffer values, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

/// Allocates the output node of an operation and wires it into the graph
/// when any input requires a gradient and recording is enabled.
template <typename Backward>
Tensor make_result(const char* op, Shape shape, Buffer values,
                   std::initializer_list<const Tensor*> inputs, Backward&& backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->inputs.push_back(t->node_ptr());
    node->backward = std::forward<Backward>(backward_fn);
  }
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                   to_string(b.shape()));
}

template <typename F, typename DF>
Tensor unary(const char* op, const Tensor& a, F f, DF df_from_output) {
  require_defined(a, op);
  Buffer out(a.numel());
  auto in = a.data();
  std::transform(in.begin(), in.end(), out.begin(), f);
  return make_result(op, a.shape(), std::move(out), {&a}, [df_from_output](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& gx = x.ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += self.grad[i] * df_from_output(x.value[i], self.value[i]);
  });
}

}  // namespace

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

Buffer& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
  if (rows == 0 || cols == 0) throw ShapeError("tensor dimensions must be positive");
  return Tensor(make_leaf({rows, cols}, Buffer(rows * cols, value), requires_grad));
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, Buffer values,
                    bool requires_grad) {
  if (rows == 0 || cols == 0) throw ShapeError("tensor dimensions must be positive");
  if (values.size() != rows * cols) {
    throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " +
                     to_string(Shape{rows, cols}));
  }
  return Tensor(make_leaf({rows, cols}, std::move(values), requires_grad));
}

Tensor Tensor::from(const Eigen::MatrixXd& m, bool requires_grad) {
  Buffer values(static_cast<std::size_t>(m.size()));
  MutMap(values.data(), m.rows(), m.cols()) = m;
  return from(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
              std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(1, 1, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::span<double> Tensor::data() { return node_->value; }
std::span<const double> Tensor::data() const { return node_->value; }

double Tensor::operator()(std::size_t r, std::size_t c) const {
  return node_->value[r * node_->shape.cols + c];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on non-scalar tensor " + to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor(make_leaf(node_->shape, node_->value, node_->requires_grad));
}

Tensor Tensor::detach() const { return Tensor(make_leaf(node_->shape, node_->value, false)); }

Eigen::MatrixXd Tensor::to_eigen() const { return view(*node_); }

// ---- tape / backward -------------------------------------------------------

Tape record_tape(const Tensor& root) {
  require_defined(root, "record_tape");
  Tape tape;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS so long unrolls cannot overflow the stack.
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      tape.order.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  Tape tape = record_tape(loss);
  for (Node* n : tape.order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  Node* root = loss.node();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = tape.order.rbegin(); it != tape.order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf()) continue;
    n->backward(*n);
    // Interior gradients are not needed once propagated.
    Buffer().swap(n->grad);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- primitives ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const Shape out_shape{a.rows(), b.cols()};
  Buffer out(out_shape.numel());
  MutMap(out.data(), out_shape.rows, out_shape.cols).noalias() = view(*a.node()) * view(*b.node());
  return make_result("matmul", out_shape, std::move(out), {&a, &b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) grad_mut(x).noalias() += grad_view(self) * view(y).transpose();
    if (y.requires_grad) grad_mut(y).noalias() += view(x).transpose() * grad_view(self);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  const bool same = a.shape() == b.shape();
  const bool row_broadcast = !same && b.rows() == 1 && b.cols() == a.cols();
  if (!same && !row_broadcast) shape_error("add", a, b);
  Buffer out(a.data().begin(), a.data().end());
  const std::size_t cols = a.cols();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += same ? bv[i] : bv[i % cols];
  return make_result("add", a.shape(), std::move(out), {&a, &b}, [same](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      auto& gx = x.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    }
    if (y.requires_grad) {
      if (same) {
        auto& gy = y.ensure_grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += self.grad[i];
      } else {
        grad_mut(y) += grad_view(self).colwise().sum();
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  if (a.shape() != b.shape()) shape_error("sub", a, b);
  Buffer out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result("sub", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) {
      auto& gx = x.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    }
    if (y.requires_grad) {
      auto& gy = y.ensure_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gy[i] -= self.grad[i];
    }
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_defined(a, "hadamard");
  require_defined(b, "hadamard");
  if (a.shape() != b.shape()) shape_error("hadamard", a, b);
  Buffer out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result("hadamard", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    // x and y may alias (x * x); accumulate through ensure_grad each time.
    if (x.requires_grad) {
      auto& gx = x.ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& gy = y.ensure_grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += self.grad[i] * x.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary("add_scalar", a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_defined(a, "concat_cols");
  require_defined(b, "concat_cols");
  if (a.rows() != b.rows()) shape_error("concat_cols", a, b);
  const std::size_t rows = a.rows();
  const std::size_t p = a.cols();
  const std::size_t q = b.cols();
  Buffer out(rows * (p + q));
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.begin() + r * p, p, out.begin() + r * (p + q));
    std::copy_n(bv.begin() + r * q, q, out.begin() + r * (p + q) + p);
  }
  return make_result("concat_cols", Shape{rows, p + q}, std::move(out), {&a, &b},
                     [rows, p, q](Node& self) {
                       Node& x = *self.inputs[0];
                       Node& y = *self.inputs[1];
                       if (x.requires_grad) {
                         auto& gx = x.ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < p; ++c) gx[r * p + c] += self.grad[r * (p + q) + c];
                       }
                       if (y.requires_grad) {
                         auto& gy = y.ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < q; ++c)
                             gy[r * q + c] += self.grad[r * (p + q) + p + c];
                       }
                     });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result("sum", Shape{1, 1}, {total}, {&a}, [](Node& self) {
    Node& x = *self.inputs[0];
    if (!x.requires_grad) return;
    auto& gx = x.ensure_grad();
    for (double& g : gx) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor block_left_multiply(const Tensor& op, const Tensor& x) {
  require_defined(op, "block_left_multiply");
  require_defined(x, "block_left_multiply");
  const std::size_t n = op.rows();
  if (op.cols() != n || x.rows() % n != 0) shape_error("block_left_multiply", op, x);
  const std::size_t blocks = x.rows() / n;
  const std::size_t f = x.cols();
  Buffer out(x.numel());
  ConstMap p = view(*op.node());
  for (std::size_t b = 0; b < blocks; ++b) {
    MutMap(out.data() + b * n * f, n, f).noalias() =
        p * ConstMap(x.data().data() + b * n * f, n, f);
  }
  Tensor op_const = op.requires_grad() ? op.detach() : op;
  return make_result("block_left_multiply", x.shape(), std::move(out), {&op_const, &x},
                     [n, f, blocks](Node& self) {
                       Node& pn = *self.inputs[0];
                       Node& xn = *self.inputs[1];
                       if (!xn.requires_grad) return;
                       ConstMap p = view(pn);
                       auto& gx = xn.ensure_grad();
                       for (std::size_t b = 0; b < blocks; ++b) {
                         MutMap(gx.data() + b * n * f, n, f).noalias() +=
                             p.transpose() * ConstMap(self.grad.data() + b * n * f, n, f);
                       }
                     });
}

}  // namespace tgcn::ad
