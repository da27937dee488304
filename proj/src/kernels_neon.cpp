// NEON (aarch64) variants of the kernel set. float64x2 registers hold lane
// pairs {0,1} and {2,3} of the scalar reference's 4-lane accumulation, and
// multiplies stay separate from adds (no fused vfma), so results are
// bit-identical to the scalar backend.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

#include "kernels_table.hpp"
#include "rdmt/kernels.hpp"

namespace rdmt::kern {

namespace {

inline double combine_lanes(float64x2_t acc01, float64x2_t acc23, double tail) {
  const double l0 = vgetq_lane_f64(acc01, 0);
  const double l1 = vgetq_lane_f64(acc01, 1);
  const double l2 = vgetq_lane_f64(acc23, 0);
  const double l3 = vgetq_lane_f64(acc23, 1);
  return ((l0 + l1) + (l2 + l3)) + tail;
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return combine_lanes(acc01, acc23, tail);
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc01 = vaddq_f64(acc01, vld1q_f64(x + i));
    acc23 = vaddq_f64(acc23, vld1q_f64(x + i + 2));
  }
  double tail = 0;
  for (; i < n; ++i) tail += x[i];
  return combine_lanes(acc01, acc23, tail);
}

void axpy_neon(double* y, double a, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vy = vld1q_f64(y + i);
    vy = vaddq_f64(vy, vmulq_f64(va, vld1q_f64(x + i)));
    vst1q_f64(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void vadd_neon(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul_neon(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void vaddmul_neon(double* y, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vy = vld1q_f64(y + i);
    vy = vaddq_f64(vy, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    vst1q_f64(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

void scale_neon(double* x, double a, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), va));
  }
  for (; i < n; ++i) x[i] *= a;
}

void adam_update_neon(double* p, double* m, double* v, const double* g, std::size_t n,
                      double b1, double b2, double bc1, double bc2, double lr,
                      double eps) {
  const float64x2_t vb1 = vdupq_n_f64(b1);
  const float64x2_t vb2 = vdupq_n_f64(b2);
  const float64x2_t vomb1 = vdupq_n_f64(1.0 - b1);
  const float64x2_t vomb2 = vdupq_n_f64(1.0 - b2);
  const float64x2_t vbc1 = vdupq_n_f64(bc1);
  const float64x2_t vbc2 = vdupq_n_f64(bc2);
  const float64x2_t vlr = vdupq_n_f64(lr);
  const float64x2_t veps = vdupq_n_f64(eps);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vg = vld1q_f64(g + i);
    float64x2_t vm = vaddq_f64(vmulq_f64(vb1, vld1q_f64(m + i)), vmulq_f64(vomb1, vg));
    float64x2_t vv = vaddq_f64(vmulq_f64(vb2, vld1q_f64(v + i)),
                               vmulq_f64(vomb2, vmulq_f64(vg, vg)));
    vst1q_f64(m + i, vm);
    vst1q_f64(v + i, vv);
    float64x2_t mhat = vdivq_f64(vm, vbc1);
    float64x2_t denom = vaddq_f64(vsqrtq_f64(vdivq_f64(vv, vbc2)), veps);
    float64x2_t step = vdivq_f64(vmulq_f64(vlr, mhat), denom);
    vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), step));
  }
  const double omb1 = 1.0 - b1;
  const double omb2 = 1.0 - b2;
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + omb1 * g[i];
    v[i] = b2 * v[i] + omb2 * (g[i] * g[i]);
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const KernelTable kNeonTable = {
    dot_neon,  sum_neon,     axpy_neon,  vadd_neon,
    vmul_neon, vaddmul_neon, scale_neon, adam_update_neon,
};

}  // namespace rdmt::kern

#endif  // aarch64
