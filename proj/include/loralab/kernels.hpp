#pragma once

#include <cstddef>
#include <string_view>

namespace loralab::kernels {

/// The arithmetic inner loops exist in a scalar reference version and in
/// SIMD variants. One backend is selected at process start (CPU detection,
/// overridable via LORA_LAB_KERNELS=scalar|avx2|neon) and used for the whole
/// run. Elementwise kernels round identically across backends; reductions
/// (dot, sum_sq, sum_abs) may differ in association and are equivalence-
/// tested against the scalar reference with a tolerance.
enum class Backend { scalar, avx2, neon };

Backend active();
bool supported(Backend b);
const char* name(Backend b);

/// Test hook: pin the backend for the rest of the process. Throws
/// std::invalid_argument if the backend is not available on this machine.
void force(Backend b);

// ---- reductions -----------------------------------------------------------

double dot(const double* a, const double* b, std::size_t n);
double sum_sq(const double* x, std::size_t n);
double sum_abs(const double* x, std::size_t n);

// ---- elementwise (bit-identical across backends) --------------------------

/// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

/// out[i] = x[i] > 0 ? x[i] : 0
void relu(const double* x, double* out, std::size_t n);

/// out[i] = v[i] > 0 ? c * w[i] : 0   (ReLU backward through a cached
/// activation v, merged with the upstream scale c)
void masked_grad(double c, const double* w, const double* v, double* out, std::size_t n);

/// v[i] = relu(a[i] + b[i]); returns dot(w, v). The reduction uses the same
/// accumulation pattern as dot(), so the fused call matches relu+dot exactly
/// within a backend.
double add_relu_dot(const double* a, const double* b, const double* w, double* v, std::size_t n);

// ---- optimizer updates (elementwise, bit-identical across backends) -------

struct AdamConsts {
  double lr = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double bias1 = 1.0;  // 1 - beta1^t for the current step t
  double bias2 = 1.0;  // 1 - beta2^t
};

/// Decoupled weight decay, then bias-corrected Adam:
///   p -= lr*wd*p;  m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2;
///   p -= lr * (m/bias1) / (sqrt(v/bias2) + eps)
void adamw_update(double* p, const double* g, double* m, double* v, std::size_t n,
                  const AdamConsts& c);

/// p[i] -= lr * sign(g[i]), with sign(0) = 0. Deltas are exactly in
/// {-lr, 0, +lr}.
void signsgd_update(double* p, const double* g, std::size_t n, double lr);

/// p[i] -= lr * g[i]
void sgd_update(double* p, const double* g, std::size_t n, double lr);

}  // namespace loralab::kernels
