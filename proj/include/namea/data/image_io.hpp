#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "namea/tensor.hpp"

namespace namea::data {

/// Reads an 8-bit PNG (gray, RGB or RGBA) or binary PPM/PGM into [C,H,W]
/// floats in [0,1]. Gray images are returned with C = 1.
Tensor read_image(const std::filesystem::path& path);

/// Writes [C,H,W] in [0,1] as 8-bit PNG (C = 1 or 3).
void write_png(const std::filesystem::path& path, const Tensor& image);
void write_png_gray8(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::size_t height,
                     std::size_t width);
/// 1-bit grayscale; nonzero entries become white.
void write_png_gray1(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::size_t height,
                     std::size_t width);

}  // namespace namea::data
