#include "loralab/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_table.hpp"

namespace loralab::kernels {

namespace {

double scalar_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double scalar_sum_sq(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double scalar_sum_abs(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
  return acc;
}

void scalar_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scalar_relu(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void scalar_masked_grad(double c, const double* w, const double* v, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = v[i] > 0.0 ? c * w[i] : 0.0;
}

double scalar_add_relu_dot(const double* a, const double* b, const double* w, double* v,
                           std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = a[i] + b[i];
    const double r = s > 0.0 ? s : 0.0;
    v[i] = r;
    acc += w[i] * r;
  }
  return acc;
}

void scalar_adamw_update(double* p, const double* g, double* m, double* v, std::size_t n,
                         const AdamConsts& c) {
  for (std::size_t i = 0; i < n; ++i) {
    double pi = p[i];
    if (c.weight_decay != 0.0) pi = pi - c.lr * c.weight_decay * pi;
    const double gi = g[i];
    const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
    const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const double m_hat = mi / c.bias1;
    const double v_hat = vi / c.bias2;
    p[i] = pi - c.lr * (m_hat / (std::sqrt(v_hat) + c.eps));
  }
}

void scalar_signsgd_update(double* p, const double* g, std::size_t n, double lr) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (g[i] > 0.0 ? 1.0 : 0.0) - (g[i] < 0.0 ? 1.0 : 0.0);
    p[i] -= lr * s;
  }
}

void scalar_sgd_update(double* p, const double* g, std::size_t n, double lr) {
  for (std::size_t i = 0; i < n; ++i) p[i] -= lr * g[i];
}

Backend detect_backend() {
  if (const char* env = std::getenv("LORA_LAB_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && supported(Backend::avx2)) return Backend::avx2;
    if (v == "neon" && supported(Backend::neon)) return Backend::neon;
    if (v != "auto")
      throw std::invalid_argument("LORA_LAB_KERNELS: unknown or unsupported backend \"" + v +
                                  "\"");
  }
#if defined(LORALAB_HAVE_AVX2_TU)
  if (supported(Backend::avx2)) return Backend::avx2;
#endif
#if defined(LORALAB_HAVE_NEON_TU)
  if (supported(Backend::neon)) return Backend::neon;
#endif
  return Backend::scalar;
}

std::atomic<const detail::KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const detail::KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &detail::scalar_table();
    case Backend::avx2:
#if defined(LORALAB_HAVE_AVX2_TU)
      return &detail::avx2_table();
#else
      break;
#endif
    case Backend::neon:
#if defined(LORALAB_HAVE_NEON_TU)
      return &detail::neon_table();
#else
      break;
#endif
  }
  return nullptr;
}

const detail::KernelTable& table() {
  const detail::KernelTable* t = g_table.load(std::memory_order_acquire);
  if (t == nullptr) {
    const Backend b = detect_backend();
    t = table_for(b);
    g_backend.store(b, std::memory_order_relaxed);
    g_table.store(t, std::memory_order_release);
  }
  return *t;
}

}  // namespace

namespace detail {

const KernelTable& scalar_table() {
  static const KernelTable t{scalar_dot,         scalar_sum_sq,      scalar_sum_abs,
                             scalar_axpy,        scalar_relu,        scalar_masked_grad,
                             scalar_add_relu_dot, scalar_adamw_update, scalar_signsgd_update,
                             scalar_sgd_update};
  return t;
}

}  // namespace detail

bool supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(LORALAB_HAVE_AVX2_TU) && (defined(__x86_64__) || defined(__i386__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(LORALAB_HAVE_NEON_TU)
      return true;  // baseline on aarch64
#else
      return false;
#endif
  }
  return false;
}

const char* name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "?";
}

Backend active() {
  table();  // ensure resolved
  return g_backend.load(std::memory_order_relaxed);
}

void force(Backend b) {
  const detail::KernelTable* t = supported(b) ? table_for(b) : nullptr;
  if (t == nullptr)
    throw std::invalid_argument(std::string("kernels: backend not available: ") + name(b));
  g_backend.store(b, std::memory_order_relaxed);
  g_table.store(t, std::memory_order_release);
}

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }
double sum_sq(const double* x, std::size_t n) { return table().sum_sq(x, n); }
double sum_abs(const double* x, std::size_t n) { return table().sum_abs(x, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { table().axpy(a, x, y, n); }
void relu(const double* x, double* out, std::size_t n) { table().relu(x, out, n); }
void masked_grad(double c, const double* w, const double* v, double* out, std::size_t n) {
  table().masked_grad(c, w, v, out, n);
}
double add_relu_dot(const double* a, const double* b, const double* w, double* v, std::size_t n) {
  return table().add_relu_dot(a, b, w, v, n);
}
void adamw_update(double* p, const double* g, double* m, double* v, std::size_t n,
                  const AdamConsts& c) {
  table().adamw_update(p, g, m, v, n, c);
}
void signsgd_update(double* p, const double* g, std::size_t n, double lr) {
  table().signsgd_update(p, g, n, lr);
}
void sgd_update(double* p, const double* g, std::size_t n, double lr) {
  table().sgd_update(p, g, n, lr);
}

}  // namespace loralab::kernels
