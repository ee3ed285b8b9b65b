#pragma once

#include <functional>
#include <vector>

#include <doctest.h>

#include "nqreader/fdiff.hpp"
#include "nqreader/tensor.hpp"

namespace nqreader::testing {

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, Scalar scale = 1.0) {
  return rng.normal_matrix(rows, cols, scale);
}

// Finite-difference check of an op composition. forward() must rebuild the
// graph from the given leaves; the loss is a fixed random weighting of the
// output so permutation bugs cannot cancel out.
inline void check_op_gradients(const std::function<Tensor()>& forward,
                               std::vector<Tensor> leaves, Scalar eps = 1e-5,
                               Scalar tol = 1e-4) {
  Rng rng(777);
  Tensor out = forward();
  Tensor weights = Tensor::leaf(random_matrix(rng, out.rows(), out.cols()));
  auto loss_graph = [&]() { return sum_all(hadamard(forward(), weights)); };

  for (Tensor& leaf : leaves) leaf.reset_grad();
  backward(loss_graph());

  auto loss_value = [&]() {
    NoGradGuard guard;
    return loss_graph().item();
  };

  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Tensor& leaf = leaves[k];
    // a leaf with no path to the loss legitimately carries a zero gradient
    Matrix analytic =
        leaf.has_grad() ? leaf.grad() : Matrix::Zero(leaf.rows(), leaf.cols());
    Matrix fd = fd_gradient(loss_value, leaf.value(), eps);
    Scalar worst = 0.0;
    for (Index i = 0; i < fd.rows(); ++i)
      for (Index j = 0; j < fd.cols(); ++j)
        worst = std::max(worst, relative_error(analytic(i, j), fd(i, j)));
    INFO("leaf ", k, " max relative error ", worst);
    CHECK(worst < tol);
  }
}

}  // namespace nqreader::testing
