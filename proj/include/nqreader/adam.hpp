#pragma once

#include <vector>

#include "nqreader/tensor.hpp"

namespace nqreader {

// Adam with bias correction. One Slot per parameter, in registration order.
struct AdamState {
  struct Slot {
    Matrix first_moment;
    Matrix second_moment;
  };
  std::vector<Slot> slots;
  long step = 0;
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
};

AdamState adam_init(const std::vector<Tensor>& params, Scalar learning_rate);

// One optimizer step over all parameters, reading each tensor's accumulated
// gradient (a parameter with no gradient is treated as zero-gradient).
// Does not reset gradients.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace nqreader
