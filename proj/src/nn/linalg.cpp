#include "namea/nn/linalg.hpp"

#include <vector>

#include "namea/simd/kernels.hpp"

namespace namea::nn {

void transpose(const float* src, float* dst, std::size_t rows, std::size_t cols) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += kBlock) {
    for (std::size_t j0 = 0; j0 < cols; j0 += kBlock) {
      const std::size_t i1 = i0 + kBlock < rows ? i0 + kBlock : rows;
      const std::size_t j1 = j0 + kBlock < cols ? j0 + kBlock : cols;
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
    }
  }
}

void matmul(const float* a, bool trans_a, const float* b, bool trans_b, float* c, std::size_t m,
            std::size_t n, std::size_t k, bool accumulate) {
  thread_local std::vector<float> scratch_a, scratch_b;
  if (trans_a) {
    scratch_a.resize(m * k);
    transpose(a, scratch_a.data(), k, m);
    a = scratch_a.data();
  }
  if (trans_b) {
    scratch_b.resize(k * n);
    transpose(b, scratch_b.data(), n, k);
    b = scratch_b.data();
  }
  simd::active().gemm(m, n, k, a, b, c, accumulate);
}

void im2col(const float* image, const ConvGeometry& g, float* columns) {
  const std::size_t ho = g.out_height(), wo = g.out_width();
  const auto h = static_cast<std::ptrdiff_t>(g.height), w = static_cast<std::ptrdiff_t>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const float* plane = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        float* out = columns + row * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            out[oy * wo + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? plane[iy * w + ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* columns, const ConvGeometry& g, float* image) {
  const std::size_t ho = g.out_height(), wo = g.out_width();
  const auto h = static_cast<std::ptrdiff_t>(g.height), w = static_cast<std::ptrdiff_t>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    float* plane = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        const float* in = columns + row * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= h) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < w) plane[iy * w + ix] += in[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace namea::nn
