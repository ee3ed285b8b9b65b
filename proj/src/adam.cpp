#include "nqreader/adam.hpp"

#include <cmath>

namespace nqreader {

AdamState adam_init(const std::vector<Tensor>& params, Scalar learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  state.slots.reserve(params.size());
  for (const Tensor& p : params)
    state.slots.push_back({Matrix::Zero(p.rows(), p.cols()), Matrix::Zero(p.rows(), p.cols())});
  return state;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.slots.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(state.slots.size()) + " state slots");
  ++state.step;
  const Scalar bc1 = 1.0 - std::pow(state.beta1, static_cast<Scalar>(state.step));
  const Scalar bc2 = 1.0 - std::pow(state.beta2, static_cast<Scalar>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    AdamState::Slot& slot = state.slots[i];
    if (slot.first_moment.rows() != p.rows() || slot.first_moment.cols() != p.cols())
      throw ShapeError("adam_step: state shape " +
                       shape_str(slot.first_moment.rows(), slot.first_moment.cols()) +
                       " does not match parameter " + shape_str(p.rows(), p.cols()));
    Matrix grad = p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols());
    slot.first_moment = state.beta1 * slot.first_moment + (1.0 - state.beta1) * grad;
    slot.second_moment =
        state.beta2 * slot.second_moment.array() + (1.0 - state.beta2) * grad.array().square();
    Matrix m_hat = slot.first_moment / bc1;
    Matrix v_hat = slot.second_moment / bc2;
    p.value().array() -=
        state.learning_rate * m_hat.array() / (v_hat.array().sqrt() + state.epsilon);
  }
}

}  // namespace nqreader
