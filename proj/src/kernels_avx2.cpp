// AVX2+FMA kernel variants. Elementwise kernels mirror the scalar rounding
// exactly (mul+add, no contraction); reductions use a fixed 16-wide,
// 4-accumulator skeleton shared by dot/sum_sq/sum_abs/add_relu_dot so the
// fused forward matches relu-then-dot bit for bit within this backend.

#include <immintrin.h>

#include <cmath>

#include "kernels_table.hpp"

namespace loralab::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

inline double reduce4(__m256d a0, __m256d a1, __m256d a2, __m256d a3) {
  return hsum(_mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3)));
}

// relu with the scalar semantics (x > 0 ? x : 0): NaN and -0 both map to +0.
inline __m256d relu_pd(__m256d x) {
  const __m256d zero = _mm256_setzero_pd();
  return _mm256_and_pd(_mm256_cmp_pd(x, zero, _CMP_GT_OQ), x);
}

double avx2_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = acc0, acc2 = acc0, acc3 = acc0;
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double total = reduce4(acc0, acc1, acc2, acc3);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double avx2_sum_sq(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = acc0, acc2 = acc0, acc3 = acc0;
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m256d x0 = _mm256_loadu_pd(x + i);
    const __m256d x1 = _mm256_loadu_pd(x + i + 4);
    const __m256d x2 = _mm256_loadu_pd(x + i + 8);
    const __m256d x3 = _mm256_loadu_pd(x + i + 12);
    acc0 = _mm256_fmadd_pd(x0, x0, acc0);
    acc1 = _mm256_fmadd_pd(x1, x1, acc1);
    acc2 = _mm256_fmadd_pd(x2, x2, acc2);
    acc3 = _mm256_fmadd_pd(x3, x3, acc3);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d x0 = _mm256_loadu_pd(x + i);
    acc0 = _mm256_fmadd_pd(x0, x0, acc0);
  }
  double total = reduce4(acc0, acc1, acc2, acc3);
  for (; i < n; ++i) total += x[i] * x[i];
  return total;
}

double avx2_sum_abs(const double* x, std::size_t n) {
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d acc0 = _mm256_setzero_pd(), acc1 = acc0, acc2 = acc0, acc3 = acc0;
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_add_pd(acc0, _mm256_and_pd(abs_mask, _mm256_loadu_pd(x + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_and_pd(abs_mask, _mm256_loadu_pd(x + i + 4)));
    acc2 = _mm256_add_pd(acc2, _mm256_and_pd(abs_mask, _mm256_loadu_pd(x + i + 8)));
    acc3 = _mm256_add_pd(acc3, _mm256_and_pd(abs_mask, _mm256_loadu_pd(x + i + 12)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_and_pd(abs_mask, _mm256_loadu_pd(x + i)));
  double total = reduce4(acc0, acc1, acc2, acc3);
  for (; i < n; ++i) total += std::fabs(x[i]);
  return total;
}

void avx2_axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void avx2_relu(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, relu_pd(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void avx2_masked_grad(double c, const double* w, const double* v, double* out, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(v + i), zero, _CMP_GT_OQ);
    const __m256d prod = _mm256_mul_pd(vc, _mm256_loadu_pd(w + i));
    _mm256_storeu_pd(out + i, _mm256_and_pd(mask, prod));
  }
  for (; i < n; ++i) out[i] = v[i] > 0.0 ? c * w[i] : 0.0;
}

double avx2_add_relu_dot(const double* a, const double* b, const double* w, double* v,
                         std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = acc0, acc2 = acc0, acc3 = acc0;
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m256d r0 = relu_pd(_mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    const __m256d r1 =
        relu_pd(_mm256_add_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
    const __m256d r2 =
        relu_pd(_mm256_add_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8)));
    const __m256d r3 =
        relu_pd(_mm256_add_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12)));
    _mm256_storeu_pd(v + i, r0);
    _mm256_storeu_pd(v + i + 4, r1);
    _mm256_storeu_pd(v + i + 8, r2);
    _mm256_storeu_pd(v + i + 12, r3);
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), r0, acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(w + i + 4), r1, acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(w + i + 8), r2, acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(w + i + 12), r3, acc3);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d r0 = relu_pd(_mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    _mm256_storeu_pd(v + i, r0);
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), r0, acc0);
  }
  double total = reduce4(acc0, acc1, acc2, acc3);
  for (; i < n; ++i) {
    const double s = a[i] + b[i];
    const double r = s > 0.0 ? s : 0.0;
    v[i] = r;
    total += w[i] * r;
  }
  return total;
}

void avx2_adamw_update(double* p, const double* g, double* m, double* v, std::size_t n,
                       const AdamConsts& c) {
  const __m256d vb1 = _mm256_set1_pd(c.beta1);
  const __m256d vb2 = _mm256_set1_pd(c.beta2);
  const __m256d vab1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d vab2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d vbias1 = _mm256_set1_pd(c.bias1);
  const __m256d vbias2 = _mm256_set1_pd(c.bias2);
  const __m256d veps = _mm256_set1_pd(c.eps);
  const __m256d vlr = _mm256_set1_pd(c.lr);
  const __m256d vlrwd = _mm256_set1_pd(c.lr * c.weight_decay);
  const bool decay = c.weight_decay != 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d pi = _mm256_loadu_pd(p + i);
    if (decay) pi = _mm256_sub_pd(pi, _mm256_mul_pd(vlrwd, pi));
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi =
        _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(vab1, gi));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(vab2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, vbias1);
    const __m256d v_hat = _mm256_div_pd(vi, vbias2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), veps);
    const __m256d step = _mm256_mul_pd(vlr, _mm256_div_pd(m_hat, denom));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(pi, step));
  }
  for (; i < n; ++i) {
    double pi = p[i];
    if (decay) pi = pi - c.lr * c.weight_decay * pi;
    const double gi = g[i];
    const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
    const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    p[i] = pi - c.lr * ((mi / c.bias1) / (std::sqrt(vi / c.bias2) + c.eps));
  }
}

void avx2_signsgd_update(double* p, const double* g, std::size_t n, double lr) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(gi, zero, _CMP_GT_OQ), one);
    const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(gi, zero, _CMP_LT_OQ), one);
    const __m256d sign = _mm256_sub_pd(pos, neg);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), _mm256_mul_pd(vlr, sign)));
  }
  for (; i < n; ++i) {
    const double s = (g[i] > 0.0 ? 1.0 : 0.0) - (g[i] < 0.0 ? 1.0 : 0.0);
    p[i] -= lr * s;
  }
}

void avx2_sgd_update(double* p, const double* g, std::size_t n, double lr) {
  const __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(vlr, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), prod));
  }
  for (; i < n; ++i) p[i] -= lr * g[i];
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t{avx2_dot,          avx2_sum_sq,       avx2_sum_abs,
                             avx2_axpy,         avx2_relu,         avx2_masked_grad,
                             avx2_add_relu_dot, avx2_adamw_update, avx2_signsgd_update,
                             avx2_sgd_update};
  return t;
}

}  // namespace loralab::kernels::detail
