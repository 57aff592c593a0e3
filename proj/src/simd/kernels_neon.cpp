#include <arm_neon.h>

#include <cmath>

#include "rtb/simd/kernels.hpp"

namespace rtb::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double sum_squares_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t a = vld1q_f64(x + i);
    acc = vfmaq_f64(acc, a, a);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

void relu_neon(const double* x, double* y, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmaxq_f64(vld1q_f64(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void adam_neon(double* params, const double* grads, double* m, double* v, std::size_t n,
               const AdamCoefficients& c) {
  const double step = c.learning_rate / c.bias_correction1;
  const double inv_bc2 = 1.0 / c.bias_correction2;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grads + i);
    const float64x2_t mi =
        vfmaq_f64(vmulq_n_f64(g, 1.0 - c.beta1), vld1q_f64(m + i), vdupq_n_f64(c.beta1));
    const float64x2_t vi = vfmaq_f64(vmulq_n_f64(vmulq_f64(g, g), 1.0 - c.beta2), vld1q_f64(v + i),
                                     vdupq_n_f64(c.beta2));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t denom =
        vaddq_f64(vsqrtq_f64(vmulq_n_f64(vi, inv_bc2)), vdupq_n_f64(c.epsilon));
    const float64x2_t upd = vdivq_f64(vmulq_n_f64(mi, step), denom);
    vst1q_f64(params + i, vsubq_f64(vld1q_f64(params + i), upd));
  }
  for (; i < n; ++i) {
    const double g = grads[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    params[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + c.epsilon);
  }
}

void lerp_neon(double tau, const double* source, double* target, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t keep = vmulq_n_f64(vld1q_f64(target + i), 1.0 - tau);
    vst1q_f64(target + i, vaddq_f64(vmulq_n_f64(vld1q_f64(source + i), tau), keep));
  }
  const double keep = 1.0 - tau;
  for (; i < n; ++i) target[i] = tau * source[i] + keep * target[i];
}

constexpr KernelTable kNeon{Isa::kNeon, dot_neon,  axpy_neon, sum_squares_neon,
                            relu_neon,  adam_neon, lerp_neon};

}  // namespace

const KernelTable* neon_kernels_compiled() { return &kNeon; }

}  // namespace rtb::simd
