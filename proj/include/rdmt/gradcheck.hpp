#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>

#include "rdmt/tensor.hpp"

namespace rdmt::nd {

struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_coord = 0;
};

// Central-difference verification of reverse-mode gradients.
//
// f evaluates the scalar objective at the current parameter values AND
// accumulates analytic gradients into each param's grad buffer (grads are
// zeroed before every call). The analytic gradient captured on the first
// call is compared per coordinate against (f(x+h) - f(x-h)) / 2h with
// relative error |a-n| / max(|a|,|n|,1e-8).
//
// Throws NonFinite if f ever produces NaN/Inf.
GradCheckReport grad_check(std::span<Tensor* const> params,
                           const std::function<double()>& f, double h = 1e-5,
                           double tol = 1e-4);

}  // namespace rdmt::nd
