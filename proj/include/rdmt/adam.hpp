#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rdmt/tensor.hpp"

namespace rdmt::nd {

// Adam with bias correction. One state per parameter tensor; t increments
// once per step.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-3;

  void init(const Tensor& param) {
    m.assign(param.numel(), 0.0);
    v.assign(param.numel(), 0.0);
    t = 0;
  }
};

void adam_step(Tensor& param, std::span<const double> grad, AdamState& state);

// Convenience wrapper stepping a whole parameter set from the tensors' own
// grad buffers, with an optional uniform gradient scale (1/batch).
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor*> params, double lr);

  void step(double grad_scale = 1.0);
  void zero_grad();
  std::span<Tensor* const> params() const { return params_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<AdamState> states_;
  std::vector<double> scaled_;
};

}  // namespace rdmt::nd
