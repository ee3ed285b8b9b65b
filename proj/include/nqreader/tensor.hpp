#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "nqreader/common.hpp"
#include "nqreader/paragraph_map.hpp"

namespace nqreader {

// Additive-mask sentinel. Finite so that masked entries stay NaN-free through
// the stabilized softmax while still producing exact zeros.
inline constexpr Scalar kNegInf = -1e30;

// Entries at or below this are treated as masked by the softmax.
inline constexpr Scalar kMaskThreshold = -1e29;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until first touched
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

  bool is_leaf() const { return !backprop; }

  Matrix& grad_ref() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

}  // namespace detail

// 2-D f64 tensor participating in a tape-recorded computation graph.
// Handles are cheap to copy; copies alias the same node. Leaves created with
// requires_grad accumulate gradients across backward() calls until reset_grad().
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Matrix value, bool requires_grad = false);
  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor scalar(Scalar v);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }

  const Matrix& value() const { return node_->value; }
  // Mutable access, intended for leaves (optimizer updates, finite differencing).
  Matrix& value() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  const Matrix& grad() const;
  void reset_grad() { node_->grad.resize(0, 0); }

  // Value of a 1x1 tensor.
  Scalar item() const;

  detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op(Matrix value, const std::vector<Tensor>& inputs,
                        std::function<void(detail::Node&)> backprop);
};

// Additive attention mask: every entry is exactly 0 or kNegInf.
class AdditiveMask {
 public:
  AdditiveMask(Index rows, Index cols) : entries_(Matrix::Zero(rows, cols)) {}

  explicit AdditiveMask(Matrix entries) : entries_(std::move(entries)) {
    for (Index i = 0; i < entries_.rows(); ++i)
      for (Index j = 0; j < entries_.cols(); ++j) {
        Scalar v = entries_(i, j);
        if (v != 0.0 && v != kNegInf)
          throw DataError("AdditiveMask: entries must be exactly 0 or the NEG_INF sentinel");
      }
  }

  Index rows() const { return entries_.rows(); }
  Index cols() const { return entries_.cols(); }
  const Matrix& entries() const { return entries_; }
  void block(Index i, Index j) { entries_(i, j) = kNegInf; }
  bool blocked(Index i, Index j) const { return entries_(i, j) != 0.0; }

 private:
  Matrix entries_;
};

enum class Activation { kLinear, kTanh, kSigmoid, kGelu };

// While a guard is alive, ops return plain values: no parents, no backprop,
// requires_grad=false. Used for finite-difference evaluations and prediction.
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

// --- graph ops ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Scalar c);
// y = x + bias broadcast over rows; bias is 1 x cols.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, Index first, Index count);
Tensor slice_rows(const Tensor& x, Index first, Index count);
// y.row(i) = x.row(indices[i]); backward scatter-adds, so repeated indices accumulate.
Tensor gather_rows(const Tensor& x, const std::vector<Index>& indices);
Tensor activate(const Tensor& x, Activation act);
// activation(x * w + bias); bias is 1 x out and broadcasts over rows.
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& bias, Activation act);
// Row-wise softmax of x + sum(masks), computed with max-subtraction over the
// unmasked entries of each row. Masked entries are exactly 0 in the output;
// rows whose entries are all masked come out all-zero.
Tensor masked_softmax(const Tensor& x, const std::vector<AdditiveMask>& masks);
Tensor softmax_rows(const Tensor& x);
// Row-wise normalization to zero mean and unit variance (population variance,
// eps inside the square root), then gamma/beta scale and shift. gamma and beta
// are 1 x cols.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps = 1e-5);
Tensor mean_pool_rows(const Tensor& x);
// Column-wise max; gradient flows to the first row attaining the max.
Tensor max_pool_rows(const Tensor& x);
// Row i of the result is the mean of the x-rows mapped to paragraph i.
Tensor segment_mean_pool(const Tensor& x, const ParagraphMap& seg);
// -log softmax(logits)[target], or -log probs[target] when input_is_probs
// (probabilities clamped at 1e-12 before the log). Input is 1 x k.
Tensor cross_entropy(const Tensor& logits_or_probs, Index target, bool input_is_probs = false);
Tensor sum_all(const Tensor& x);

// Reverse-mode sweep from a scalar loss. Gradients of requires_grad leaves
// accumulate across calls; interior gradients are rebuilt per call.
void backward(const Tensor& loss);

}  // namespace nqreader
