#include "nqreader/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace nqreader {

namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
}

constexpr Scalar kInvSqrt2 = 0.70710678118654752440;
constexpr Scalar kInvSqrt2Pi = 0.39894228040143267794;

Scalar gelu_value(Scalar x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

Scalar gelu_derivative(Scalar x) {
  Scalar cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  Scalar pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::leaf(Matrix value, bool requires_grad) {
  if (!value.allFinite()) throw DataError("Tensor: leaf values must be finite");
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return leaf(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(Scalar v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return leaf(std::move(m));
}

const Matrix& Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("Tensor::grad: gradient not populated");
  return node_->grad;
}

Scalar Tensor::item() const {
  if (rows() != 1 || cols() != 1)
    throw ShapeError("Tensor::item: expected 1x1, got " + shape_str(rows(), cols()));
  return node_->value(0, 0);
}

// Records one op on the tape. When gradients are disabled or no input requires
// them, the result is a detached constant and the closure is dropped.
Tensor make_op(Matrix value, const std::vector<Tensor>& inputs,
               std::function<void(detail::Node&)> backprop) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  bool track = g_grad_enabled;
  if (track) {
    bool any = false;
    for (const Tensor& t : inputs) any = any || t.requires_grad();
    track = any;
  }
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.node_);
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.rows(), a.cols()) +
                     " x " + shape_str(b.rows(), b.cols()));
  Matrix out = a.value() * b.value();
  return make_op(std::move(out), {a, b}, [](detail::Node& self) {
    auto& a_node = *self.parents[0];
    auto& b_node = *self.parents[1];
    if (a_node.requires_grad) a_node.grad_ref().noalias() += self.grad * b_node.value.transpose();
    if (b_node.requires_grad) b_node.grad_ref().noalias() += a_node.value.transpose() * self.grad;
  });
}

Tensor transpose(const Tensor& x) {
  return make_op(x.value().transpose(), {x}, [](detail::Node& self) {
    self.parents[0]->grad_ref() += self.grad.transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->grad_ref() += self.grad;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b}, [](detail::Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_ref() += self.grad;
    if (self.parents[1]->requires_grad) self.parents[1]->grad_ref() -= self.grad;
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](detail::Node& self) {
    auto& a_node = *self.parents[0];
    auto& b_node = *self.parents[1];
    if (a_node.requires_grad) a_node.grad_ref() += self.grad.cwiseProduct(b_node.value);
    if (b_node.requires_grad) b_node.grad_ref() += self.grad.cwiseProduct(a_node.value);
  });
}

Tensor scale(const Tensor& x, Scalar c) {
  return make_op(x.value() * c, {x}, [c](detail::Node& self) {
    self.parents[0]->grad_ref() += self.grad * c;
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols())
    throw ShapeError("add_row_bias: bias must be 1x" + std::to_string(x.cols()) + ", got " +
                     shape_str(bias.rows(), bias.cols()));
  Matrix out = x.value().rowwise() + bias.value().row(0);
  return make_op(std::move(out), {x, bias}, [](detail::Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->grad_ref() += self.grad;
    if (self.parents[1]->requires_grad)
      self.parents[1]->grad_ref() += self.grad.colwise().sum();
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: row counts differ, " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  Index split = a.cols();
  return make_op(std::move(out), {a, b}, [split](detail::Node& self) {
    if (self.parents[0]->requires_grad)
      self.parents[0]->grad_ref() += self.grad.leftCols(split);
    if (self.parents[1]->requires_grad)
      self.parents[1]->grad_ref() += self.grad.rightCols(self.grad.cols() - split);
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols())
    throw ShapeError("concat_rows: column counts differ, " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.value();
  out.bottomRows(b.rows()) = b.value();
  Index split = a.rows();
  return make_op(std::move(out), {a, b}, [split](detail::Node& self) {
    if (self.parents[0]->requires_grad)
      self.parents[0]->grad_ref() += self.grad.topRows(split);
    if (self.parents[1]->requires_grad)
      self.parents[1]->grad_ref() += self.grad.bottomRows(self.grad.rows() - split);
  });
}

Tensor slice_cols(const Tensor& x, Index first, Index count) {
  if (first < 0 || count < 0 || first + count > x.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") outside " + shape_str(x.rows(), x.cols()));
  return make_op(x.value().middleCols(first, count), {x}, [first, count](detail::Node& self) {
    self.parents[0]->grad_ref().middleCols(first, count) += self.grad;
  });
}

Tensor slice_rows(const Tensor& x, Index first, Index count) {
  if (first < 0 || count < 0 || first + count > x.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") outside " + shape_str(x.rows(), x.cols()));
  return make_op(x.value().middleRows(first, count), {x}, [first, count](detail::Node& self) {
    self.parents[0]->grad_ref().middleRows(first, count) += self.grad;
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<Index>& indices) {
  Matrix out(static_cast<Index>(indices.size()), x.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    Index r = indices[i];
    if (r < 0 || r >= x.rows())
      throw ShapeError("gather_rows: index " + std::to_string(r) + " outside " +
                       shape_str(x.rows(), x.cols()));
    out.row(static_cast<Index>(i)) = x.value().row(r);
  }
  return make_op(std::move(out), {x}, [indices](detail::Node& self) {
    Matrix& g = self.parents[0]->grad_ref();
    for (std::size_t i = 0; i < indices.size(); ++i)
      g.row(indices[i]) += self.grad.row(static_cast<Index>(i));
  });
}

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::kLinear:
      return x;
    case Activation::kTanh: {
      Matrix out = x.value().array().tanh();
      return make_op(std::move(out), {x}, [](detail::Node& self) {
        self.parents[0]->grad_ref().array() +=
            self.grad.array() * (1.0 - self.value.array().square());
      });
    }
    case Activation::kSigmoid: {
      Matrix out = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
      return make_op(std::move(out), {x}, [](detail::Node& self) {
        self.parents[0]->grad_ref().array() +=
            self.grad.array() * self.value.array() * (1.0 - self.value.array());
      });
    }
    case Activation::kGelu: {
      Matrix out = x.value().unaryExpr([](Scalar v) { return gelu_value(v); });
      return make_op(std::move(out), {x}, [](detail::Node& self) {
        const Matrix& in = self.parents[0]->value;
        self.parents[0]->grad_ref() +=
            self.grad.cwiseProduct(in.unaryExpr([](Scalar v) { return gelu_derivative(v); }));
      });
    }
  }
  throw std::logic_error("activate: unknown activation");
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& bias, Activation act) {
  return activate(add_row_bias(matmul(x, w), bias), act);
}

Tensor masked_softmax(const Tensor& x, const std::vector<AdditiveMask>& masks) {
  for (const AdditiveMask& m : masks)
    if (m.rows() != x.rows() || m.cols() != x.cols())
      throw ShapeError("masked_softmax: mask shape " + shape_str(m.rows(), m.cols()) +
                       " does not match input " + shape_str(x.rows(), x.cols()));
  Matrix combined = x.value();
  for (const AdditiveMask& m : masks) combined += m.entries();

  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < combined.rows(); ++i) {
    Scalar row_max = kNegInf;
    bool any_open = false;
    for (Index j = 0; j < combined.cols(); ++j) {
      Scalar v = combined(i, j);
      if (v > kMaskThreshold) {
        any_open = true;
        if (v > row_max) row_max = v;
      }
    }
    if (!any_open) {
      out.row(i).setZero();
      continue;
    }
    Scalar sum = 0.0;
    for (Index j = 0; j < combined.cols(); ++j) {
      Scalar v = combined(i, j);
      if (v > kMaskThreshold) {
        Scalar e = std::exp(v - row_max);
        out(i, j) = e;
        sum += e;
      } else {
        out(i, j) = 0.0;
      }
    }
    out.row(i) /= sum;
  }

  return make_op(std::move(out), {x}, [](detail::Node& self) {
    // dS = y .* (dY - rowwise_dot(dY, y)); masked entries have y = 0.
    const Matrix& y = self.value;
    Matrix& g = self.parents[0]->grad_ref();
    for (Index i = 0; i < y.rows(); ++i) {
      Scalar dot = self.grad.row(i).dot(y.row(i));
      g.row(i).array() += y.row(i).array() * (self.grad.row(i).array() - dot);
    }
  });
}

Tensor softmax_rows(const Tensor& x) { return masked_softmax(x, {}); }

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps) {
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 || beta.cols() != x.cols())
    throw ShapeError("layer_norm: gamma/beta must be 1x" + std::to_string(x.cols()));
  const Index cols = x.cols();
  Matrix normalized(x.rows(), cols);
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar mean = x.value().row(i).mean();
    Scalar var = (x.value().row(i).array() - mean).square().mean();
    normalized.row(i) = (x.value().row(i).array() - mean) / std::sqrt(var + eps);
  }
  Matrix out = (normalized.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return make_op(std::move(out), {x, gamma, beta}, [eps](detail::Node& self) {
    using RowArray = Eigen::Array<Scalar, 1, Eigen::Dynamic>;
    auto& x_node = *self.parents[0];
    auto& gamma_node = *self.parents[1];
    auto& beta_node = *self.parents[2];
    const Matrix& in = x_node.value;
    for (Index i = 0; i < in.rows(); ++i) {
      Scalar mean = in.row(i).mean();
      Scalar var = (in.row(i).array() - mean).square().mean();
      Scalar inv_std = 1.0 / std::sqrt(var + eps);
      RowArray x_hat = (in.row(i).array() - mean) * inv_std;
      RowArray dy = self.grad.row(i).array();
      if (gamma_node.requires_grad) gamma_node.grad_ref().row(0).array() += dy * x_hat;
      if (beta_node.requires_grad) beta_node.grad_ref().row(0).array() += dy;
      if (x_node.requires_grad) {
        RowArray g = dy * gamma_node.value.row(0).array();
        Scalar g_mean = g.mean();
        Scalar gx_mean = (g * x_hat).mean();
        x_node.grad_ref().row(i).array() += inv_std * (g - g_mean - x_hat * gx_mean);
      }
    }
  });
}

Tensor mean_pool_rows(const Tensor& x) {
  if (x.rows() < 1) throw ShapeError("mean_pool_rows: empty input");
  // plain running sum; keeps the result bit-identical to a row loop
  Matrix out = Matrix::Zero(1, x.cols());
  for (Index i = 0; i < x.rows(); ++i) out += x.value().row(i);
  out /= static_cast<Scalar>(x.rows());
  Index rows = x.rows();
  return make_op(std::move(out), {x}, [rows](detail::Node& self) {
    Matrix& g = self.parents[0]->grad_ref();
    g += (Matrix::Ones(rows, 1) * self.grad) / static_cast<Scalar>(rows);
  });
}

Tensor max_pool_rows(const Tensor& x) {
  if (x.rows() < 1) throw ShapeError("max_pool_rows: empty input");
  Matrix out(1, x.cols());
  for (Index j = 0; j < x.cols(); ++j) out(0, j) = x.value().col(j).maxCoeff();
  return make_op(std::move(out), {x}, [](detail::Node& self) {
    // gradient routes to the first row attaining each column max
    const Matrix& in = self.parents[0]->value;
    Matrix& g = self.parents[0]->grad_ref();
    for (Index j = 0; j < in.cols(); ++j) {
      Index arg = 0;
      for (Index i = 1; i < in.rows(); ++i)
        if (in(i, j) > in(arg, j)) arg = i;
      g(arg, j) += self.grad(0, j);
    }
  });
}

Tensor segment_mean_pool(const Tensor& x, const ParagraphMap& seg) {
  if (seg.size() != x.rows())
    throw ShapeError("segment_mean_pool: map length " + std::to_string(seg.size()) +
                     " does not match rows of " + shape_str(x.rows(), x.cols()));
  std::vector<Index> counts = seg.counts();
  Matrix out = Matrix::Zero(seg.paragraphs(), x.cols());
  for (Index j = 0; j < x.rows(); ++j) out.row(seg[j]) += x.value().row(j);
  for (Index p = 0; p < seg.paragraphs(); ++p)
    out.row(p) /= static_cast<Scalar>(counts[static_cast<std::size_t>(p)]);
  return make_op(std::move(out), {x}, [seg, counts](detail::Node& self) {
    Matrix& g = self.parents[0]->grad_ref();
    for (Index j = 0; j < g.rows(); ++j) {
      Index p = seg[j];
      g.row(j) += self.grad.row(p) / static_cast<Scalar>(counts[static_cast<std::size_t>(p)]);
    }
  });
}

Tensor cross_entropy(const Tensor& logits_or_probs, Index target, bool input_is_probs) {
  constexpr Scalar kProbClamp = 1e-12;
  if (logits_or_probs.rows() != 1)
    throw ShapeError("cross_entropy: expected a 1xk row, got " +
                     shape_str(logits_or_probs.rows(), logits_or_probs.cols()));
  const Index k = logits_or_probs.cols();
  if (target < 0 || target >= k)
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " outside [0, " + std::to_string(k) + ")");
  if (!logits_or_probs.value().allFinite())
    throw DataError("cross_entropy: non-finite input");

  Matrix out(1, 1);
  if (input_is_probs) {
    Scalar p = logits_or_probs.value()(0, target);
    out(0, 0) = -std::log(std::max(p, kProbClamp));
    return make_op(std::move(out), {logits_or_probs}, [target](detail::Node& self) {
      Scalar p = self.parents[0]->value(0, target);
      if (p > kProbClamp)
        self.parents[0]->grad_ref()(0, target) += self.grad(0, 0) * (-1.0 / p);
    });
  }

  // log-sum-exp with max subtraction
  const auto& z = logits_or_probs.value();
  Scalar z_max = z.row(0).maxCoeff();
  Scalar sum = (z.row(0).array() - z_max).exp().sum();
  out(0, 0) = std::log(sum) + z_max - z(0, target);
  return make_op(std::move(out), {logits_or_probs}, [target](detail::Node& self) {
    const Matrix& z = self.parents[0]->value;
    Scalar z_max = z.row(0).maxCoeff();
    Eigen::ArrayXd e = (z.row(0).array() - z_max).exp().transpose();
    Eigen::ArrayXd p = e / e.sum();
    p(target) -= 1.0;
    self.parents[0]->grad_ref().row(0).array() += self.grad(0, 0) * p.transpose();
  });
}

Tensor sum_all(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return make_op(std::move(out), {x}, [](detail::Node& self) {
    self.parents[0]->grad_ref().array() += self.grad(0, 0);
  });
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(loss.rows(), loss.cols()));
  if (!loss.requires_grad())
    throw std::invalid_argument("backward: loss is not on the tape");

  // iterative post-order DFS; reversed it yields a topological order
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node(), 0});
  visited.insert(loss.node());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      detail::Node* parent = top.node->parents[top.next_parent++].get();
      if (parent->requires_grad && visited.insert(parent).second)
        stack.push_back({parent, 0});
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  // interior grads are scratch for this sweep; leaf grads accumulate
  for (detail::Node* node : order)
    if (!node->is_leaf()) node->grad = Matrix::Zero(node->value.rows(), node->value.cols());

  loss.node()->grad_ref()(0, 0) += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace nqreader
