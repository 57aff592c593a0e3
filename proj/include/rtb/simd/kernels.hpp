#pragma once

// Dense double-precision kernels behind the MLP and factorization-machine inner loops.
//
// Each kernel has a scalar reference implementation and, where the target supports it,
// an AVX2+FMA (x86-64) or NEON (AArch64) variant. The variant is chosen once at runtime
// from CPUID; RTB_ARENA_SIMD=scalar|avx2|neon|auto overrides the choice. Vector variants
// reassociate sums, so they agree with the scalar path to rounding, not bit for bit.

#include <cstddef>
#include <span>
#include <string_view>

namespace rtb::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

struct AdamCoefficients {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i x[i]^2
  double (*sum_squares)(const double* x, std::size_t n);
  // y[i] = max(x[i], 0)
  void (*relu)(const double* x, double* y, std::size_t n);
  // In-place adaptive-moment update of params from grads.
  void (*adam_step)(double* params, const double* grads, double* m, double* v, std::size_t n,
                    const AdamCoefficients& c);
  // target[i] = tau * source[i] + (1 - tau) * target[i]
  void (*lerp)(double tau, const double* source, double* target, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the variant is not compiled in or the CPU lacks the instructions.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// The dispatched table. Thread-safe; resolved on first use.
const KernelTable& active();

// Force a variant (tests, benchmarking). Returns false if unavailable.
bool select(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace rtb::simd
