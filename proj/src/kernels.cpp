#include "rdmt/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

#include "kernels_table.hpp"

namespace rdmt::kern {

// ---------------------------------------------------------------------------
// Scalar reference kernels. Reductions accumulate in four lanes (lane k sums
// elements i with i % 4 == k) and combine as ((l0+l1)+(l2+l3))+tail, the
// exact pattern the vector variants produce.
// ---------------------------------------------------------------------------

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += a[i] * b[i];
    l1 += a[i + 1] * b[i + 1];
    l2 += a[i + 2] * b[i + 2];
    l3 += a[i + 3] * b[i + 3];
  }
  double tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((l0 + l1) + (l2 + l3)) + tail;
}

double sum(const double* x, std::size_t n) {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += x[i];
    l1 += x[i + 1];
    l2 += x[i + 2];
    l3 += x[i + 3];
  }
  double tail = 0;
  for (; i < n; ++i) tail += x[i];
  return ((l0 + l1) + (l2 + l3)) + tail;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void vadd(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void vmul(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void vaddmul(double* y, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

void scale(double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double b1, double b2, double bc1, double bc2, double lr, double eps) {
  const double omb1 = 1.0 - b1;
  const double omb2 = 1.0 - b2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + omb1 * g[i];
    v[i] = b2 * v[i] + omb2 * (g[i] * g[i]);
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace scalar

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace {

constexpr KernelTable kScalarTable = {
    scalar::dot,   scalar::sum,  scalar::axpy,    scalar::vadd,
    scalar::vmul,  scalar::vaddmul, scalar::scale, scalar::adam_update,
};

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend best_backend() {
#if defined(__aarch64__)
  return Backend::kNeon;
#else
  if (cpu_has_avx2()) return Backend::kAvx2;
  return Backend::kScalar;
#endif
}

Backend from_env(Backend fallback) {
  const char* e = std::getenv("RDMT_KERNELS");
  if (!e) return fallback;
  if (std::strcmp(e, "scalar") == 0) return Backend::kScalar;
  if (std::strcmp(e, "avx2") == 0 && backend_available(Backend::kAvx2)) return Backend::kAvx2;
  if (std::strcmp(e, "neon") == 0 && backend_available(Backend::kNeon)) return Backend::kNeon;
  return fallback;
}

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return &kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::kAvx2:
      return &kAvx2Table;
#endif
#if defined(__aarch64__)
    case Backend::kNeon:
      return &kNeonTable;
#endif
    default:
      return &kScalarTable;
  }
}

Backend g_backend = from_env(best_backend());
const KernelTable* g_table = table_for(g_backend);

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "?";
}

Backend active_backend() { return g_backend; }

bool backend_available(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      return cpu_has_avx2();
#else
      return false;
#endif
    case Backend::kNeon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

bool set_backend(Backend b) {
  if (!backend_available(b)) return false;
  g_backend = b;
  g_table = table_for(b);
  return true;
}

double dot(const double* a, const double* b, std::size_t n) { return g_table->dot(a, b, n); }
double sum(const double* x, std::size_t n) { return g_table->sum(x, n); }
void axpy(double* y, double a, const double* x, std::size_t n) { g_table->axpy(y, a, x, n); }
void vadd(double* out, const double* a, const double* b, std::size_t n) {
  g_table->vadd(out, a, b, n);
}
void vmul(double* out, const double* a, const double* b, std::size_t n) {
  g_table->vmul(out, a, b, n);
}
void vaddmul(double* y, const double* a, const double* b, std::size_t n) {
  g_table->vaddmul(y, a, b, n);
}
void scale(double* x, double a, std::size_t n) { g_table->scale(x, a, n); }
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double b1, double b2, double bc1, double bc2, double lr, double eps) {
  g_table->adam_update(p, m, v, g, n, b1, b2, bc1, bc2, lr, eps);
}

}  // namespace rdmt::kern
