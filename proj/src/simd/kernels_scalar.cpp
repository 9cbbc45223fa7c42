#include <cmath>
#include <cstring>

#include "namea/simd/kernels.hpp"

namespace namea::simd {
namespace {

// Same operand selection as the x86 max/min instructions (second operand on
// ties and NaN) so that signed zeros match the vector path bit for bit.
inline float vmax(float a, float b) { return a > b ? a : b; }
inline float vmin(float a, float b) { return a < b ? a : b; }

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(float));
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = a[i * k + p];
      const float* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(float alpha, float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void sign_step(const float* x, const float* g, float alpha, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float s = g[i] > 0.0f ? 1.0f : (g[i] < 0.0f ? -1.0f : 0.0f);
    out[i] = x[i] + alpha * s;
  }
}

void clip_ball(const float* x_adv, const float* x_clean, float eps, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float lo = vmax(x_clean[i] - eps, 0.0f);
    const float hi = vmin(x_clean[i] + eps, 1.0f);
    out[i] = vmin(vmax(x_adv[i], lo), hi);
  }
}

void masked_blend(const float* x, const float* m, const float* fill, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (1.0f - m[i]) * x[i] + m[i] * fill[i];
}

void merge(const float* g_tr, const float* g_te, const float* keep, float beta, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = g_tr[i] + beta * (g_te[i] * keep[i]);
}

void clamp01(float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = vmin(vmax(x[i], 0.0f), 1.0f);
}

void relu_forward(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* gy, float* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0f ? gy[i] : 0.0f;
}

double abs_sum(const float* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(static_cast<double>(x[i]));
  return s;
}

double dot(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::Scalar, "scalar", gemm,         add,     axpy,
                                 scale,           sign_step, clip_ball,   masked_blend,
                                 merge,           clamp01,  relu_forward, relu_backward,
                                 abs_sum,         dot};
  return table;
}

}  // namespace namea::simd
