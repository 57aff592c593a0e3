#include <cmath>

#include "rtb/simd/kernels.hpp"

namespace rtb::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum_squares_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void relu_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void adam_scalar(double* params, const double* grads, double* m, double* v, std::size_t n,
                 const AdamCoefficients& c) {
  const double step = c.learning_rate / c.bias_correction1;
  const double inv_bc2 = 1.0 / c.bias_correction2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    params[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + c.epsilon);
  }
}

void lerp_scalar(double tau, const double* source, double* target, std::size_t n) {
  const double keep = 1.0 - tau;
  for (std::size_t i = 0; i < n; ++i) target[i] = tau * source[i] + keep * target[i];
}

constexpr KernelTable kScalar{Isa::kScalar, dot_scalar,  axpy_scalar, sum_squares_scalar,
                              relu_scalar,  adam_scalar, lerp_scalar};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace rtb::simd
