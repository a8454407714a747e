#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every operation eagerly computes its value and, when any input
// requires a gradient, records a closure that propagates the output gradient
// back to its inputs. `backward(root)` runs those closures in reverse
// topological order.

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "hsum/tensor_types.hpp"

namespace hsum::ad {

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient reaches this node
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;

  Matrix& grad_ref();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Zero matrix when no gradient has been accumulated.
  Matrix grad() const;
  double scalar() const;
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }
  void zero_grad() { node_->grad.resize(0, 0); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on the current thread while alive.
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

Var constant(Matrix value);
Var parameter(Matrix value);
Var scalar_constant(double v);

// Node with an externally computed value. `backward_fn` receives the output
// node and adds into `grad_ref()` of each input that requires a gradient.
Var custom_op(Matrix value, std::span<const Var> inputs, std::function<void(Node&)> backward_fn);

// Seeds d(root)/d(root) = 1 and propagates. Root must be 1x1.
void backward(const Var& root);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double s);
Var add_row(const Var& a, const Var& row);  // broadcast a 1xC row over all rows
Var linear(const Var& x, const Var& weight, const Var& bias);

// Shape manipulation.
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, std::span<const int> indices);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

// Pointwise nonlinearities.
Var sigmoid(const Var& a);
Var gelu(const Var& a);

// Row-wise operations.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// Softmax over each row of (logits + additive_mask); mask entries are 0 or a
// large negative constant.
Var masked_softmax_rows(const Var& logits, const Matrix& additive_mask);
Var l2_normalize_rows(const Var& a, double eps = 1e-12);
Var mean_rows(const Var& a);  // R x C -> 1 x C

// Reductions to 1x1.
Var sum(const Var& a);
Var mean(const Var& a);
// Mean over rows of -log softmax(logits_row)[target_row].
Var softmax_cross_entropy(const Var& logits, std::span<const int> targets);
// sum_k coefficient_k * term_k over 1x1 terms.
Var weighted_sum(std::span<const double> coefficients, std::span<const Var> terms);

// Inverted dropout; identity when rate == 0.
Var dropout(const Var& a, double rate, std::mt19937_64& rng);

}  // namespace hsum::ad
