#include <atomic>
#include <cstdlib>
#include <string>

#include "rtb/common/log.hpp"
#include "rtb/simd/kernels.hpp"

namespace rtb::simd {

#if defined(RTB_HAVE_AVX2)
const KernelTable* avx2_kernels_compiled();
#endif
#if defined(RTB_HAVE_NEON)
const KernelTable* neon_kernels_compiled();
#endif

namespace {

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* resolve_default() {
  const char* env = std::getenv("RTB_ARENA_SIMD");
  const std::string choice = env ? env : "auto";
  if (choice == "scalar") return &scalar_kernels();
  if (choice == "avx2") {
    if (const auto* t = avx2_kernels()) return t;
    log::warn("RTB_ARENA_SIMD=avx2 requested but unavailable; using scalar kernels");
    return &scalar_kernels();
  }
  if (choice == "neon") {
    if (const auto* t = neon_kernels()) return t;
    log::warn("RTB_ARENA_SIMD=neon requested but unavailable; using scalar kernels");
    return &scalar_kernels();
  }
  if (choice != "auto") log::warn("unknown RTB_ARENA_SIMD value '" + choice + "'; using auto");
  if (const auto* t = avx2_kernels()) return t;
  if (const auto* t = neon_kernels()) return t;
  return &scalar_kernels();
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(RTB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? avx2_kernels_compiled() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(RTB_HAVE_NEON)
  // Advanced SIMD is mandatory on AArch64.
  return neon_kernels_compiled();
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const KernelTable* resolved = resolve_default();
    const KernelTable* expected = nullptr;
    g_active.compare_exchange_strong(expected, resolved, std::memory_order_acq_rel);
    t = g_active.load(std::memory_order_acquire);
  }
  return *t;
}

bool select(Isa isa) {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::kScalar: t = &scalar_kernels(); break;
    case Isa::kAvx2: t = avx2_kernels(); break;
    case Isa::kNeon: t = neon_kernels(); break;
  }
  if (t == nullptr) return false;
  g_active.store(t, std::memory_order_release);
  return true;
}

}  // namespace rtb::simd
