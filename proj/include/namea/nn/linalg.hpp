#pragma once

#include <cstddef>

namespace namea::nn {

/// C[m,n] (+)= op(A) * op(B) where op(A) is m x k and op(B) is k x n.
/// A transposed operand is stored as its untransposed k x m (n x k) matrix.
void matmul(const float* a, bool trans_a, const float* b, bool trans_b, float* c, std::size_t m,
            std::size_t n, std::size_t k, bool accumulate = false);

void transpose(const float* src, float* dst, std::size_t rows, std::size_t cols);

struct ConvGeometry {
  std::size_t in_channels, out_channels, kernel, stride, pad;
  std::size_t height, width;

  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  std::size_t patch_size() const { return in_channels * kernel * kernel; }
};

/// One image [C,H,W] -> columns [C*k*k, Ho*Wo].
void im2col(const float* image, const ConvGeometry& g, float* columns);
/// Adjoint of im2col, accumulating into `image`.
void col2im(const float* columns, const ConvGeometry& g, float* image);

}  // namespace namea::nn
