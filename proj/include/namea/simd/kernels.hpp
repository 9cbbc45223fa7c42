#pragma once

#include <cstddef>
#include <string_view>

// Inner loops of the attack and of the layer runtime. Each entry has a
// scalar reference implementation; vector variants are selected once at
// startup from CPUID (or the NAMEA_SIMD environment variable) and are
// equivalence-tested against the scalar table.
//
// Elementwise entries are bit-identical across backends. Reductions and
// gemm reassociate and only agree to rounding.

namespace namea::simd {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  Backend backend;
  std::string_view name;

  /// Row-major C[m,n] (+)= A[m,k] * B[k,n].
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
               bool accumulate);

  void (*add)(const float* a, const float* b, float* out, std::size_t n);
  /// y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  void (*scale)(float alpha, float* x, std::size_t n);

  /// out = x + alpha * sign(g), sign(0) = 0
  void (*sign_step)(const float* x, const float* g, float alpha, float* out, std::size_t n);
  /// out = clamp(x_adv, max(x_clean - eps, 0), min(x_clean + eps, 1))
  void (*clip_ball)(const float* x_adv, const float* x_clean, float eps, float* out, std::size_t n);
  /// out = (1 - m) * x + m * fill
  void (*masked_blend)(const float* x, const float* m, const float* fill, float* out, std::size_t n);
  /// out = g_tr + beta * (g_te * keep)
  void (*merge)(const float* g_tr, const float* g_te, const float* keep, float beta, float* out,
                std::size_t n);
  void (*clamp01)(float* x, std::size_t n);

  void (*relu_forward)(const float* x, float* y, std::size_t n);
  /// gx = gy where x > 0 else 0
  void (*relu_backward)(const float* x, const float* gy, float* gx, std::size_t n);

  double (*abs_sum)(const float* x, std::size_t n);
  double (*dot)(const float* a, const float* b, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

/// Table used by the library.
const KernelTable& active();
/// Overrides the startup choice. Throws when the backend is unavailable.
void select(Backend backend);

}  // namespace namea::simd
