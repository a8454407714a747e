#include "hsum/autograd.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

#include "hsum/error.hpp"
#include "hsum/random.hpp"

namespace hsum::ad {
namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

Var make_var(Matrix value, std::vector<NodePtr> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) {
    needs = needs || in->requires_grad;
  }
  if (needs && g_grad_enabled) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward_fn = std::move(fn);
  }
  return Var(std::move(node));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

void accumulate(const NodePtr& node, const Matrix& g) {
  if (node->requires_grad) {
    node->grad_ref() += g;
  }
}

}  // namespace

Matrix& Node::grad_ref() {
  if (grad.size() == 0) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  return grad;
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) {
    return Matrix::Zero(node_->value.rows(), node_->value.cols());
  }
  return node_->grad;
}

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) {
    throw DimensionError("scalar(): value is not 1x1");
  }
  return node_->value(0, 0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var scalar_constant(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var custom_op(Matrix value, std::span<const Var> inputs, std::function<void(Node&)> backward_fn) {
  std::vector<NodePtr> nodes;
  nodes.reserve(inputs.size());
  for (const auto& v : inputs) {
    nodes.push_back(v.node());
  }
  return make_var(std::move(value), std::move(nodes), std::move(backward_fn));
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw DimensionError("backward(): root must be 1x1");
  }
  if (!root.requires_grad()) {
    return;
  }
  // Iterative post-order DFS yields a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->grad_ref()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() != 0) {
      node->backward_fn(*node);
    }
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ");
  }
  return make_var(a.value() * b.value(), {a.node(), b.node()}, [](Node& self) {
    const auto& A = self.inputs[0];
    const auto& B = self.inputs[1];
    if (A->requires_grad) {
      A->grad_ref().noalias() += self.grad * B->value.transpose();
    }
    if (B->requires_grad) {
      B->grad_ref().noalias() += A->value.transpose() * self.grad;
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: column counts differ");
  }
  return make_var(a.value() * b.value().transpose(), {a.node(), b.node()}, [](Node& self) {
    const auto& A = self.inputs[0];
    const auto& B = self.inputs[1];
    if (A->requires_grad) {
      A->grad_ref().noalias() += self.grad * B->value;
    }
    if (B->requires_grad) {
      B->grad_ref().noalias() += self.grad.transpose() * A->value;
    }
  });
}

Var transpose(const Var& a) {
  return make_var(a.value().transpose(), {a.node()},
                  [](Node& self) { accumulate(self.inputs[0], self.grad.transpose()); });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_var(a.value() + b.value(), {a.node(), b.node()}, [](Node& self) {
    accumulate(self.inputs[0], self.grad);
    accumulate(self.inputs[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_var(a.value() - b.value(), {a.node(), b.node()}, [](Node& self) {
    accumulate(self.inputs[0], self.grad);
    accumulate(self.inputs[1], -self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make_var(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](Node& self) {
    const auto& A = self.inputs[0];
    const auto& B = self.inputs[1];
    accumulate(A, self.grad.cwiseProduct(B->value));
    accumulate(B, self.grad.cwiseProduct(A->value));
  });
}

Var scale(const Var& a, double s) {
  return make_var(a.value() * s, {a.node()},
                  [s](Node& self) { accumulate(self.inputs[0], self.grad * s); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: row must be 1 x cols(a)");
  }
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make_var(std::move(out), {a.node(), row.node()}, [](Node& self) {
    accumulate(self.inputs[0], self.grad);
    if (self.inputs[1]->requires_grad) {
      self.inputs[1]->grad_ref() += self.grad.colwise().sum();
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  return add_row(matmul(x, weight), bias);
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw DimensionError("slice_rows: range out of bounds");
  }
  return make_var(a.value().middleRows(start, count), {a.node()}, [start, count](Node& self) {
    if (self.inputs[0]->requires_grad) {
      self.inputs[0]->grad_ref().middleRows(start, count) += self.grad;
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: range out of bounds");
  }
  return make_var(a.value().middleCols(start, count), {a.node()}, [start, count](Node& self) {
    if (self.inputs[0]->requires_grad) {
      self.inputs[0]->grad_ref().middleCols(start, count) += self.grad;
    }
  });
}

Var gather_rows(const Var& a, std::span<const int> indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= a.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[i]) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(indices[i]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return make_var(std::move(out), {a.node()}, [idx = std::move(idx)](Node& self) {
    if (self.inputs[0]->requires_grad) {
      Matrix& g = self.inputs[0]->grad_ref();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
      }
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) {
    throw DimensionError("concat_rows: no parts");
  }
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  std::vector<NodePtr> inputs;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column counts differ");
    }
    offsets.push_back(rows);
    rows += p.rows();
    inputs.push_back(p.node());
  }
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    out.middleRows(offsets[k], parts[k].rows()) = parts[k].value();
  }
  return make_var(std::move(out), std::move(inputs), [offsets](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      const auto& in = self.inputs[k];
      if (in->requires_grad) {
        in->grad_ref() += self.grad.middleRows(offsets[k], in->value.rows());
      }
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) {
    throw DimensionError("concat_cols: no parts");
  }
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front().rows();
  std::vector<NodePtr> inputs;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row counts differ");
    }
    offsets.push_back(cols);
    cols += p.cols();
    inputs.push_back(p.node());
  }
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    out.middleCols(offsets[k], parts[k].cols()) = parts[k].value();
  }
  return make_var(std::move(out), std::move(inputs), [offsets](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      const auto& in = self.inputs[k];
      if (in->requires_grad) {
        in->grad_ref() += self.grad.middleCols(offsets[k], in->value.cols());
      }
    }
  });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0) {
      return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return make_var(std::move(out), {a.node()}, [](Node& self) {
    const Matrix& y = self.value;
    accumulate(self.inputs[0], self.grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var gelu(const Var& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  Matrix out = a.value().unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  return make_var(std::move(out), {a.node()}, [](Node& self) {
    const auto& X = self.inputs[0];
    if (!X->requires_grad) {
      return;
    }
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = X->value.unaryExpr([inv_sqrt_2pi](double x) {
      return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * std::exp(-0.5 * x * x) * inv_sqrt_2pi;
    });
    X->grad_ref() += self.grad.cwiseProduct(d);
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index cols = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != cols || beta.rows() != 1 || beta.cols() != cols) {
    throw DimensionError("layer_norm: gamma/beta must be 1 x cols");
  }
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mu = x.value().row(r).mean();
    const double var = (x.value().row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix out = xhat;
  for (Eigen::Index r = 0; r < rows; ++r) {
    out.row(r) = xhat.row(r).cwiseProduct(gamma.value().row(0)) + beta.value().row(0);
  }
  return make_var(std::move(out), {x.node(), gamma.node(), beta.node()},
                  [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                    const auto& X = self.inputs[0];
                    const auto& G = self.inputs[1];
                    const auto& B = self.inputs[2];
                    if (G->requires_grad) {
                      G->grad_ref() += self.grad.cwiseProduct(xhat).colwise().sum();
                    }
                    if (B->requires_grad) {
                      B->grad_ref() += self.grad.colwise().sum();
                    }
                    if (X->requires_grad) {
                      Matrix& gx = X->grad_ref();
                      for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                        const RowVector gxhat = self.grad.row(r).cwiseProduct(G->value.row(0));
                        const double mean_g = gxhat.mean();
                        const double mean_gx = gxhat.cwiseProduct(xhat.row(r)).mean();
                        gx.row(r) += (gxhat.array() - mean_g - xhat.row(r).array() * mean_gx).matrix() *
                                     inv_std(r);
                      }
                    }
                  });
}

Var masked_softmax_rows(const Var& logits, const Matrix& additive_mask) {
  if (additive_mask.rows() != logits.rows() || additive_mask.cols() != logits.cols()) {
    throw DimensionError("masked_softmax_rows: mask shape differs from logits");
  }
  Matrix z = logits.value() + additive_mask;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    // Scalar exp underflows blocked entries to exactly 0; the vectorized
    // version clamps its argument and leaves denormals.
    z.row(r) = (z.row(r).array() - m).unaryExpr([](double v) { return std::exp(v); });
    z.row(r) /= z.row(r).sum();
  }
  return make_var(std::move(z), {logits.node()}, [](Node& self) {
    const auto& L = self.inputs[0];
    if (!L->requires_grad) {
      return;
    }
    const Matrix& y = self.value;
    const Eigen::VectorXd dots = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = self.grad;
    g.colwise() -= dots;
    L->grad_ref() += y.cwiseProduct(g);
  });
}

Var l2_normalize_rows(const Var& a, double eps) {
  Eigen::VectorXd norms = a.value().rowwise().norm();
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    norms(r) = std::max(norms(r), eps);
    out.row(r) /= norms(r);
  }
  return make_var(std::move(out), {a.node()}, [norms = std::move(norms)](Node& self) {
    const auto& A = self.inputs[0];
    if (!A->requires_grad) {
      return;
    }
    const Matrix& y = self.value;
    Matrix& g = A->grad_ref();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = self.grad.row(r).dot(y.row(r));
      g.row(r) += (self.grad.row(r) - y.row(r) * dot) / norms(r);
    }
  });
}

Var mean_rows(const Var& a) {
  if (a.rows() == 0) {
    throw DimensionError("mean_rows: empty input");
  }
  const double n = static_cast<double>(a.rows());
  return make_var(a.value().colwise().mean(), {a.node()}, [n](Node& self) {
    const auto& A = self.inputs[0];
    if (A->requires_grad) {
      A->grad_ref().rowwise() += self.grad.row(0) / n;
    }
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_var(std::move(out), {a.node()}, [](Node& self) {
    const auto& A = self.inputs[0];
    if (A->requires_grad) {
      A->grad_ref().array() += self.grad(0, 0);
    }
  });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) {
    throw DimensionError("mean: empty input");
  }
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> targets) {
  const Eigen::Index rows = logits.rows();
  if (static_cast<Eigen::Index>(targets.size()) != rows || rows == 0) {
    throw DimensionError("softmax_cross_entropy: need one target per row");
  }
  Matrix probs = logits.value();
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= logits.cols()) {
      throw DimensionError("softmax_cross_entropy: target out of range");
    }
    const double m = probs.row(r).maxCoeff();
    probs.row(r) = (probs.row(r).array() - m).exp();
    const double z = probs.row(r).sum();
    total += -(logits.value()(r, t) - m - std::log(z));
    probs.row(r) /= z;
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(rows);
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_var(std::move(out), {logits.node()},
                  [probs = std::move(probs), tgt = std::move(tgt)](Node& self) {
                    const auto& L = self.inputs[0];
                    if (!L->requires_grad) {
                      return;
                    }
                    Matrix g = probs;
                    for (std::size_t r = 0; r < tgt.size(); ++r) {
                      g(static_cast<Eigen::Index>(r), tgt[r]) -= 1.0;
                    }
                    L->grad_ref() += g * (self.grad(0, 0) / static_cast<double>(tgt.size()));
                  });
}

namespace {

Var add_terms_impl(std::span<const double> coefficients, std::span<const Var> terms) {
  Matrix out = Matrix::Zero(1, 1);
  std::vector<NodePtr> inputs;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k].rows() != 1 || terms[k].cols() != 1) {
      throw DimensionError("weighted_sum: terms must be 1x1");
    }
    out(0, 0) += coefficients[k] * terms[k].value()(0, 0);
    inputs.push_back(terms[k].node());
  }
  std::vector<double> coef(coefficients.begin(), coefficients.end());
  return make_var(std::move(out), std::move(inputs), [coef = std::move(coef)](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      if (self.inputs[k]->requires_grad) {
        self.inputs[k]->grad_ref()(0, 0) += coef[k] * self.grad(0, 0);
      }
    }
  });
}

}  // namespace

Var weighted_sum(std::span<const double> coefficients, std::span<const Var> terms) {
  if (coefficients.size() != terms.size()) {
    throw DimensionError("weighted_sum: coefficient count differs from term count");
  }
  return add_terms_impl(coefficients, terms);
}

Var dropout(const Var& a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) {
    return a;
  }
  if (rate >= 1.0) {
    throw RangeError("dropout: rate must be < 1");
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
  }
  return mul(a, constant(std::move(mask)));
}

}  // namespace hsum::ad
