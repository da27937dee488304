#pragma once

#include <cstddef>

namespace rdmt::kern {

// Dense double-precision inner loops behind the autodiff core. Every kernel
// has a scalar reference implementation and, where the hardware allows,
// an AVX2 (x86-64) or NEON (aarch64) variant selected at runtime.
//
// Reductions use a fixed 4-lane-blocked accumulation order in ALL variants,
// and no variant uses FMA contraction, so every backend produces
// bit-identical results. The equivalence suite asserts exact equality.

enum class Backend { kScalar, kAvx2, kNeon };

const char* backend_name(Backend b);

// Backend chosen at startup (best available), or overridden.
Backend active_backend();

// Returns false (and leaves the backend unchanged) if the requested backend
// is not available on this CPU.
bool set_backend(Backend b);

// True if the named backend can run on this machine.
bool backend_available(Backend b);

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// sum_i x[i]
double sum(const double* x, std::size_t n);

// y[i] += a * x[i]
void axpy(double* y, double a, const double* x, std::size_t n);

// out[i] = a[i] + b[i]
void vadd(double* out, const double* a, const double* b, std::size_t n);

// out[i] = a[i] * b[i]
void vmul(double* out, const double* a, const double* b, std::size_t n);

// y[i] += a[i] * b[i]
void vaddmul(double* y, const double* a, const double* b, std::size_t n);

// x[i] *= a
void scale(double* x, double a, std::size_t n);

// Fused Adam update with bias correction:
//   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
//   p -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
// bc1, bc2 are the precomputed 1-b^t factors.
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double b1, double b2, double bc1, double bc2, double lr, double eps);

}  // namespace rdmt::kern
