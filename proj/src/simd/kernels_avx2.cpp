// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include <immintrin.h>

#include <cstring>

#include "namea/simd/kernels.hpp"

namespace namea::simd {
namespace {

inline __m256i tail_mask(std::size_t rem) {
  alignas(32) static const int table[16] = {-1, -1, -1, -1, -1, -1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 8 - rem));
}

// 4x16 register tile: eight accumulators, A broadcast, B streamed row-wise.
template <std::size_t Rows>
inline void gemm_tile(std::size_t n, std::size_t k, const float* a, const float* b, float* c, std::size_t j) {
  __m256 acc[Rows][2];
  for (std::size_t r = 0; r < Rows; ++r) {
    acc[r][0] = _mm256_loadu_ps(c + r * n + j);
    acc[r][1] = _mm256_loadu_ps(c + r * n + j + 8);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * n + j);
    const __m256 b1 = _mm256_loadu_ps(b + p * n + j + 8);
    for (std::size_t r = 0; r < Rows; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + r * k + p);
      acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    _mm256_storeu_ps(c + r * n + j, acc[r][0]);
    _mm256_storeu_ps(c + r * n + j + 8, acc[r][1]);
  }
}

template <std::size_t Rows>
inline void gemm_tail(std::size_t n, std::size_t k, const float* a, const float* b, float* c, std::size_t j) {
  // Up to 15 trailing columns, masked 8-wide.
  while (j < n) {
    const std::size_t rem = n - j < 8 ? n - j : 8;
    const __m256i mask = tail_mask(rem);
    __m256 acc[Rows];
    for (std::size_t r = 0; r < Rows; ++r) acc[r] = _mm256_maskload_ps(c + r * n + j, mask);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256 bv = _mm256_maskload_ps(b + p * n + j, mask);
      for (std::size_t r = 0; r < Rows; ++r) {
        acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * k + p), bv, acc[r]);
      }
    }
    for (std::size_t r = 0; r < Rows; ++r) _mm256_maskstore_ps(c + r * n + j, mask, acc[r]);
    j += rem;
  }
}

template <std::size_t Rows>
inline void gemm_rows(std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) gemm_tile<Rows>(n, k, a, b, c, j);
  gemm_tail<Rows>(n, k, a, b, c, j);
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<4>(n, k, a + i * k, b, c + i * n);
  for (; i < m; ++i) gemm_rows<1>(n, k, a + i * k, b, c + i * n);
}

void add(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_mul_ps(av, _mm256_loadu_ps(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(float alpha, float* x, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), av));
  for (; i < n; ++i) x[i] *= alpha;
}

void sign_step(const float* x, const float* g, float alpha, float* out, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gv = _mm256_loadu_ps(g + i);
    const __m256 pos = _mm256_and_ps(_mm256_cmp_ps(gv, zero, _CMP_GT_OQ), one);
    const __m256 neg = _mm256_and_ps(_mm256_cmp_ps(gv, zero, _CMP_LT_OQ), one);
    const __m256 s = _mm256_sub_ps(pos, neg);
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_mul_ps(av, s)));
  }
  for (; i < n; ++i) {
    const float s = g[i] > 0.0f ? 1.0f : (g[i] < 0.0f ? -1.0f : 0.0f);
    out[i] = x[i] + alpha * s;
  }
}

void clip_ball(const float* x_adv, const float* x_clean, float eps, float* out, std::size_t n) {
  const __m256 ev = _mm256_set1_ps(eps);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xc = _mm256_loadu_ps(x_clean + i);
    const __m256 lo = _mm256_max_ps(_mm256_sub_ps(xc, ev), zero);
    const __m256 hi = _mm256_min_ps(_mm256_add_ps(xc, ev), one);
    _mm256_storeu_ps(out + i, _mm256_min_ps(_mm256_max_ps(_mm256_loadu_ps(x_adv + i), lo), hi));
  }
  for (; i < n; ++i) {
    const float d = x_clean[i] - eps;
    const float u = x_clean[i] + eps;
    const float lo = d > 0.0f ? d : 0.0f;
    const float hi = u < 1.0f ? u : 1.0f;
    const float t = x_adv[i] > lo ? x_adv[i] : lo;
    out[i] = t < hi ? t : hi;
  }
}

void masked_blend(const float* x, const float* m, const float* fill, float* out, std::size_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mv = _mm256_loadu_ps(m + i);
    const __m256 keep = _mm256_mul_ps(_mm256_sub_ps(one, mv), _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(out + i, _mm256_add_ps(keep, _mm256_mul_ps(mv, _mm256_loadu_ps(fill + i))));
  }
  for (; i < n; ++i) out[i] = (1.0f - m[i]) * x[i] + m[i] * fill[i];
}

void merge(const float* g_tr, const float* g_te, const float* keep, float beta, float* out, std::size_t n) {
  const __m256 bv = _mm256_set1_ps(beta);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 masked = _mm256_mul_ps(_mm256_loadu_ps(g_te + i), _mm256_loadu_ps(keep + i));
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(g_tr + i), _mm256_mul_ps(bv, masked)));
  }
  for (; i < n; ++i) out[i] = g_tr[i] + beta * (g_te[i] * keep[i]);
}

void clamp01(float* x, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_min_ps(_mm256_max_ps(_mm256_loadu_ps(x + i), zero), one));
  for (; i < n; ++i) {
    const float t = x[i] > 0.0f ? x[i] : 0.0f;
    x[i] = t < 1.0f ? t : 1.0f;
  }
}

void relu_forward(const float* x, float* y, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* gy, float* gx, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 on = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(gx + i, _mm256_and_ps(on, _mm256_loadu_ps(gy + i)));
  }
  for (; i < n; ++i) gx[i] = x[i] > 0.0f ? gy[i] : 0.0f;
}

double hsum(__m256d v) {
  alignas(32) double t[4];
  _mm256_store_pd(t, v);
  return (t[0] + t[1]) + (t[2] + t[3]);
}

double abs_sum(const float* x, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign, _mm256_cvtps_pd(_mm256_castps256_ps128(v))));
    acc1 = _mm256_add_pd(acc1, _mm256_andnot_pd(sign, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1))));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] < 0.0f ? -static_cast<double>(x[i]) : static_cast<double>(x[i]);
  return s;
}

double dot(const float* a, const float* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)), _mm256_cvtps_pd(_mm256_castps256_ps128(vb)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)), _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{Backend::Avx2, "avx2", gemm,         add,     axpy,
                                 scale,         sign_step, clip_ball, masked_blend,
                                 merge,         clamp01, relu_forward, relu_backward,
                                 abs_sum,       dot};
  return table;
}

}  // namespace namea::simd
