// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tgcn::ad {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Aligned storage so vectorized kernels take the same path on every run.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t numel() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

struct Node;

/// Dense row-major matrix of doubles taking part in a define-by-run
/// computation graph. Copies share storage; use clone() for a deep copy.
/// Scalars are 1x1.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, Buffer values,
                     bool requires_grad = false);
  static Tensor from(const Eigen::MatrixXd& m, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::size_t numel() const { return shape().numel(); }

  std::span<double> data();
  std::span<const double> data() const;
  double operator()(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  /// Gradient buffer; empty span until backward() reaches this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  bool has_grad() const;
  void zero_grad();

  /// Leaf copy with fresh storage, detached from any graph.
  Tensor clone() const;
  /// Same storage semantics as clone() but with requires_grad cleared.
  Tensor detach() const;

  Eigen::MatrixXd to_eigen() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

/// Graph node. `backward` reads `grad` of this node and accumulates into the
/// gradients of `inputs`.
struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return inputs.empty(); }
  Buffer& ensure_grad();
};

/// Ordered record of the operations reachable from a root, inputs before
/// outputs.
struct Tape {
  std::vector<Node*> order;
  std::size_t size() const { return order.size(); }
};

Tape record_tape(const Tensor& root);

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; interior gradients are reset on each call. Throws ContractError for
/// non-scalar losses.
void backward(const Tensor& loss);

/// While alive, operations on the current thread do not record graph edges.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Primitives. All throw ShapeError on incompatible shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise a + b; b may also be a 1 x cols row vector broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// relu'(0) is 0.
Tensor relu(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Applies the constant square matrix `op` to each consecutive block of
/// op.rows() rows of x: row block b of the result is op * x_b. No gradient
/// flows into `op`.
Tensor block_left_multiply(const Tensor& op, const Tensor& x);

/// 1 - a.
inline Tensor one_minus(const Tensor& a) { return add_scalar(scale(a, -1.0), 1.0); }
inline Tensor sum_squares(const Tensor& a) { return sum(hadamard(a, a)); }

}  // namespace tgcn::ad
