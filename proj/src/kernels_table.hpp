#pragma once

#include <cstddef>

#include "loralab/kernels.hpp"

namespace loralab::kernels::detail {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum_sq)(const double*, std::size_t);
  double (*sum_abs)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*relu)(const double*, double*, std::size_t);
  void (*masked_grad)(double, const double*, const double*, double*, std::size_t);
  double (*add_relu_dot)(const double*, const double*, const double*, double*, std::size_t);
  void (*adamw_update)(double*, const double*, double*, double*, std::size_t, const AdamConsts&);
  void (*signsgd_update)(double*, const double*, std::size_t, double);
  void (*sgd_update)(double*, const double*, std::size_t, double);
};

const KernelTable& scalar_table();

#if defined(LORALAB_HAVE_AVX2_TU)
const KernelTable& avx2_table();
#endif
#if defined(LORALAB_HAVE_NEON_TU)
const KernelTable& neon_table();
#endif

}  // namespace loralab::kernels::detail
