#pragma once

#include <cstddef>

// Private dispatch table shared by the kernel backends.

namespace rdmt::kern {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  void (*axpy)(double*, double, const double*, std::size_t);
  void (*vadd)(double*, const double*, const double*, std::size_t);
  void (*vmul)(double*, const double*, const double*, std::size_t);
  void (*vaddmul)(double*, const double*, const double*, std::size_t);
  void (*scale)(double*, double, std::size_t);
  void (*adam_update)(double*, double*, double*, const double*, std::size_t, double,
                      double, double, double, double, double);
};

#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Table;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonTable;
#endif

}  // namespace rdmt::kern
