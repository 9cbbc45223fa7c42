#pragma once

#include <cstddef>

namespace namea {

/// Bilinear resampling of one plane (half-pixel centres, edge clamped).
void resize_bilinear(const float* src, std::size_t h, std::size_t w, float* dst, std::size_t out_h,
                     std::size_t out_w);

/// Transpose of resize_bilinear: scatters `grad_dst` back onto `grad_src`
/// (accumulating).
void resize_bilinear_adjoint(const float* grad_dst, std::size_t out_h, std::size_t out_w, float* grad_src,
                             std::size_t h, std::size_t w);

}  // namespace namea
