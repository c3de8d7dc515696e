// NEON (aarch64) kernel variants, mirroring the AVX2 file: elementwise
// kernels keep the scalar rounding, reductions use a fixed 8-wide,
// 4-accumulator skeleton shared with add_relu_dot.

#include <arm_neon.h>

#include <cmath>

#include "kernels_table.hpp"

namespace loralab::kernels::detail {

namespace {

inline double reduce4(float64x2_t a0, float64x2_t a1, float64x2_t a2, float64x2_t a3) {
  return vaddvq_f64(vaddq_f64(vaddq_f64(a0, a1), vaddq_f64(a2, a3)));
}

inline float64x2_t relu_f64(float64x2_t x) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const uint64x2_t mask = vcgtq_f64(x, zero);
  return vreinterpretq_f64_u64(vandq_u64(mask, vreinterpretq_u64_f64(x)));
}

double neon_dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = acc0, acc2 = acc0, acc3 = acc0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc2 = vfmaq_f64(acc2, vld1q_f64(a + i + 4), vld1q_f64(b + i + 4));
    acc3 = vfmaq_f64(acc3, vld1q_f64(a + i + 6), vld1q_f64(b + i + 6));
  }
  for (; i + 2 <= n; i += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  double total = reduce4(acc0, acc1, acc2, acc3);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

double neon_sum_sq(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = acc0, acc2 = acc0, acc3 = acc0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const float64x2_t x0 = vld1q_f64(x + i);
    const float64x2_t x1 = vld1q_f64(x + i + 2);
    const float64x2_t x2 = vld1q_f64(x + i + 4);
    const float64x2_t x3 = vld1q_f64(x + i + 6);
    acc0 = vfmaq_f64(acc0, x0, x0);
    acc1 = vfmaq_f64(acc1, x1, x1);
    acc2 = vfmaq_f64(acc2, x2, x2);
    acc3 = vfmaq_f64(acc3, x3, x3);
  }
  for (; i + 2 <= n; i += 2) {
    const float64x2_t x0 = vld1q_f64(x + i);
    acc0 = vfmaq_f64(acc0, x0, x0);
  }
  double total = reduce4(acc0, acc1, acc2, acc3);
  for (; i < n; ++i) total += x[i] * x[i];
  return total;
}

double neon_sum_abs(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = acc0, acc2 = acc0, acc3 = acc0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vaddq_f64(acc0, vabsq_f64(vld1q_f64(x + i)));
    acc1 = vaddq_f64(acc1, vabsq_f64(vld1q_f64(x + i + 2)));
    acc2 = vaddq_f64(acc2, vabsq_f64(vld1q_f64(x + i + 4)));
    acc3 = vaddq_f64(acc3, vabsq_f64(vld1q_f64(x + i + 6)));
  }
  for (; i + 2 <= n; i += 2) acc0 = vaddq_f64(acc0, vabsq_f64(vld1q_f64(x + i)));
  double total = reduce4(acc0, acc1, acc2, acc3);
  for (; i < n; ++i) total += std::fabs(x[i]);
  return total;
}

void neon_axpy(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t prod = vmulq_f64(va, vld1q_f64(x + i));
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void neon_relu(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, relu_f64(vld1q_f64(x + i)));
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void neon_masked_grad(double c, const double* w, const double* v, double* out, std::size_t n) {
  const float64x2_t vc = vdupq_n_f64(c);
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t mask = vcgtq_f64(vld1q_f64(v + i), zero);
    const float64x2_t prod = vmulq_f64(vc, vld1q_f64(w + i));
    vst1q_f64(out + i, vreinterpretq_f64_u64(vandq_u64(mask, vreinterpretq_u64_f64(prod))));
  }
  for (; i < n; ++i) out[i] = v[i] > 0.0 ? c * w[i] : 0.0;
}

double neon_add_relu_dot(const double* a, const double* b, const double* w, double* v,
                         std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = acc0, acc2 = acc0, acc3 = acc0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const float64x2_t r0 = relu_f64(vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    const float64x2_t r1 = relu_f64(vaddq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
    const float64x2_t r2 = relu_f64(vaddq_f64(vld1q_f64(a + i + 4), vld1q_f64(b + i + 4)));
    const float64x2_t r3 = relu_f64(vaddq_f64(vld1q_f64(a + i + 6), vld1q_f64(b + i + 6)));
    vst1q_f64(v + i, r0);
    vst1q_f64(v + i + 2, r1);
    vst1q_f64(v + i + 4, r2);
    vst1q_f64(v + i + 6, r3);
    acc0 = vfmaq_f64(acc0, vld1q_f64(w + i), r0);
    acc1 = vfmaq_f64(acc1, vld1q_f64(w + i + 2), r1);
    acc2 = vfmaq_f64(acc2, vld1q_f64(w + i + 4), r2);
    acc3 = vfmaq_f64(acc3, vld1q_f64(w + i + 6), r3);
  }
  for (; i + 2 <= n; i += 2) {
    const float64x2_t r0 = relu_f64(vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    vst1q_f64(v + i, r0);
    acc0 = vfmaq_f64(acc0, vld1q_f64(w + i), r0);
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

void neon_adamw_update(double* p, const double* g, double* m, double* v, std::size_t n,
                       const AdamConsts& c) {
  const float64x2_t vb1 = vdupq_n_f64(c.beta1);
  const float64x2_t vb2 = vdupq_n_f64(c.beta2);
  const float64x2_t vab1 = vdupq_n_f64(1.0 - c.beta1);
  const float64x2_t vab2 = vdupq_n_f64(1.0 - c.beta2);
  const float64x2_t vbias1 = vdupq_n_f64(c.bias1);
  const float64x2_t vbias2 = vdupq_n_f64(c.bias2);
  const float64x2_t veps = vdupq_n_f64(c.eps);
  const float64x2_t vlr = vdupq_n_f64(c.lr);
  const float64x2_t vlrwd = vdupq_n_f64(c.lr * c.weight_decay);
  const bool decay = c.weight_decay != 0.0;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t pi = vld1q_f64(p + i);
    if (decay) pi = vsubq_f64(pi, vmulq_f64(vlrwd, pi));
    const float64x2_t gi = vld1q_f64(g + i);
    const float64x2_t mi = vaddq_f64(vmulq_f64(vb1, vld1q_f64(m + i)), vmulq_f64(vab1, gi));
    const float64x2_t vi =
        vaddq_f64(vmulq_f64(vb2, vld1q_f64(v + i)), vmulq_f64(vab2, vmulq_f64(gi, gi)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t m_hat = vdivq_f64(mi, vbias1);
    const float64x2_t v_hat = vdivq_f64(vi, vbias2);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(v_hat), veps);
    vst1q_f64(p + i, vsubq_f64(pi, vmulq_f64(vlr, vdivq_f64(m_hat, denom))));
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

void neon_signsgd_update(double* p, const double* g, std::size_t n, double lr) {
  const float64x2_t one = vdupq_n_f64(1.0);
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t vlr = vdupq_n_f64(lr);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t gi = vld1q_f64(g + i);
    const float64x2_t pos = vreinterpretq_f64_u64(
        vandq_u64(vcgtq_f64(gi, zero), vreinterpretq_u64_f64(one)));
    const float64x2_t neg = vreinterpretq_f64_u64(
        vandq_u64(vcltq_f64(gi, zero), vreinterpretq_u64_f64(one)));
    const float64x2_t sign = vsubq_f64(pos, neg);
    vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), vmulq_f64(vlr, sign)));
  }
  for (; i < n; ++i) {
    const double s = (g[i] > 0.0 ? 1.0 : 0.0) - (g[i] < 0.0 ? 1.0 : 0.0);
    p[i] -= lr * s;
  }
}

void neon_sgd_update(double* p, const double* g, std::size_t n, double lr) {
  const float64x2_t vlr = vdupq_n_f64(lr);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t prod = vmulq_f64(vlr, vld1q_f64(g + i));
    vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), prod));
  }
  for (; i < n; ++i) p[i] -= lr * g[i];
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable t{neon_dot,          neon_sum_sq,       neon_sum_abs,
                             neon_axpy,         neon_relu,         neon_masked_grad,
                             neon_add_relu_dot, neon_adamw_update, neon_signsgd_update,
                             neon_sgd_update};
  return t;
}

}  // namespace loralab::kernels::detail
