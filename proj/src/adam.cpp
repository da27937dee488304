#include "rdmt/adam.hpp"

#include <cmath>

#include "rdmt/kernels.hpp"

namespace rdmt::nd {

void adam_step(Tensor& param, std::span<const double> grad, AdamState& state) {
  if (grad.size() != param.numel() || state.m.size() != param.numel()) {
    throw ShapeMismatch("adam_step: param " + param.shape.str() + " vs grad size " +
                        std::to_string(grad.size()) + ", state size " +
                        std::to_string(state.m.size()));
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  kern::adam_update(param.data.data(), state.m.data(), state.v.data(), grad.data(),
                    param.numel(), state.beta1, state.beta2, bc1, bc2, state.lr,
                    state.eps);
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, double lr)
    : params_(std::move(params)), states_(params_.size()) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    states_[i].init(*params_[i]);
    states_[i].lr = lr;
  }
}

void AdamOptimizer::step(double grad_scale) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    if (grad_scale == 1.0) {
      adam_step(p, p.grad, states_[i]);
    } else {
      scaled_.assign(p.grad.begin(), p.grad.end());
      kern::scale(scaled_.data(), grad_scale, scaled_.size());
      adam_step(p, scaled_, states_[i]);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

}  // namespace rdmt::nd
