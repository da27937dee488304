#include "rdmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rdmt::nd {

namespace {

double eval(const std::function<double()>& f, std::span<Tensor* const> params) {
  for (Tensor* p : params) p->zero_grad();
  double v = f();
  if (!std::isfinite(v)) throw NonFinite("objective is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(std::span<Tensor* const> params,
                           const std::function<double()>& f, double h, double tol) {
  eval(f, params);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) {
    for (double g : p->grad) {
      if (!std::isfinite(g)) throw NonFinite("analytic gradient is not finite");
    }
    analytic.push_back(p->grad);
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (std::size_t ci = 0; ci < p.numel(); ++ci) {
      const double saved = p.data[ci];
      p.data[ci] = saved + h;
      const double up = eval(f, params);
      p.data[ci] = saved - h;
      const double down = eval(f, params);
      p.data[ci] = saved;

      const double numeric = (up - down) / (2.0 * h);
      if (!std::isfinite(numeric)) throw NonFinite("numeric gradient is not finite");
      const double a = analytic[pi][ci];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = pi;
        report.worst_coord = ci;
      }
      ++report.coords_checked;
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace rdmt::nd
