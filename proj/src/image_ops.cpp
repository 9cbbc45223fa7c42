#include "namea/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace namea {
namespace {

struct Tap {
  std::size_t i0, i1;
  float w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> axis_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, static_cast<float>(src - static_cast<double>(i0))};
  }
  return taps;
}

}  // namespace

void resize_bilinear(const float* src, std::size_t h, std::size_t w, float* dst, std::size_t out_h,
                     std::size_t out_w) {
  const auto ty = axis_taps(h, out_h);
  const auto tx = axis_taps(w, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const float* r0 = src + ty[y].i0 * w;
    const float* r1 = src + ty[y].i1 * w;
    const float wy = ty[y].w1;
    for (std::size_t x = 0; x < out_w; ++x) {
      const float wx = tx[x].w1;
      const float top = (1.0f - wx) * r0[tx[x].i0] + wx * r0[tx[x].i1];
      const float bottom = (1.0f - wx) * r1[tx[x].i0] + wx * r1[tx[x].i1];
      dst[y * out_w + x] = (1.0f - wy) * top + wy * bottom;
    }
  }
}

void resize_bilinear_adjoint(const float* grad_dst, std::size_t out_h, std::size_t out_w, float* grad_src,
                             std::size_t h, std::size_t w) {
  const auto ty = axis_taps(h, out_h);
  const auto tx = axis_taps(w, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    float* r0 = grad_src + ty[y].i0 * w;
    float* r1 = grad_src + ty[y].i1 * w;
    const float wy = ty[y].w1;
    for (std::size_t x = 0; x < out_w; ++x) {
      const float g = grad_dst[y * out_w + x];
      const float wx = tx[x].w1;
      const float gt = (1.0f - wy) * g;
      const float gb = wy * g;
      r0[tx[x].i0] += (1.0f - wx) * gt;
      r0[tx[x].i1] += wx * gt;
      r1[tx[x].i0] += (1.0f - wx) * gb;
      r1[tx[x].i1] += wx * gb;
    }
  }
}

}  // namespace namea
