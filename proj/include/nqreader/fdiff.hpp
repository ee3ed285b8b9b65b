#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "nqreader/common.hpp"

namespace nqreader {

// Symmetric relative error with an absolute floor so near-zero gradients are
// compared absolutely rather than amplified.
inline Scalar relative_error(Scalar a, Scalar b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), Scalar(1e-3)});
}

// Central finite-difference gradient of f with respect to every entry of x.
// x is perturbed in place and restored; f must re-evaluate from current x.
inline Matrix fd_gradient(const std::function<Scalar()>& f, Matrix& x, Scalar eps = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      const Scalar saved = x(i, j);
      x(i, j) = saved + eps;
      const Scalar up = f();
      x(i, j) = saved - eps;
      const Scalar down = f();
      x(i, j) = saved;
      g(i, j) = (up - down) / (2.0 * eps);
    }
  return g;
}

}  // namespace nqreader
