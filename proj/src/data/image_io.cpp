#include "namea/data/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <vector>

#include "namea/errors.hpp"

namespace namea::data {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw UsageError("cannot open " + path.string());
  return f;
}

void write_png_rows(const std::filesystem::path& path, std::size_t height, std::size_t width, int bit_depth,
                    int color_type, const std::vector<std::vector<std::uint8_t>>& rows) {
  File f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw UsageError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw UsageError("libpng write failed for " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& row : rows) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::uint8_t to_byte(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

Tensor read_png(const std::filesystem::path& path) {
  File f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw UsageError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UsageError("cannot decode " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const std::size_t c = png_get_channels(png, info);
  std::vector<std::uint8_t> buf(h * w * c);
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = buf.data() + y * w * c;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  Tensor out({c, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) out[(k * h + y) * w + x] = static_cast<float>(buf[(y * w + x) * c + k]) / 255.0f;
  return out;
}

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::string magic;
  std::size_t fields[3] = {0, 0, 0};
  is >> magic;
  for (std::size_t& f : fields) {
    while (is >> std::ws && is.peek() == '#') is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    is >> f;
  }
  const auto [w, h, maxval] = fields;
  is.get();
  if (!is || (magic != "P6" && magic != "P5") || maxval != 255) throw UsageError("unsupported PNM file " + path.string());
  const std::size_t c = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> buf(w * h * c);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!is) throw UsageError("truncated PNM file " + path.string());
  Tensor out({c, h, w});
  for (std::size_t i = 0; i < w * h; ++i)
    for (std::size_t k = 0; k < c; ++k) out[k * w * h + i] = static_cast<float>(buf[i * c + k]) / 255.0f;
  return out;
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  if (ext == ".ppm" || ext == ".pgm") return read_pnm(path);
  throw UsageError("unsupported image type " + path.string());
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) throw UsageError("write_png expects [1|3,H,W]");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<std::vector<std::uint8_t>> rows(h, std::vector<std::uint8_t>(w * c));
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t k = 0; k < c; ++k) rows[y][x * c + k] = to_byte(image[(k * h + y) * w + x]);
  write_png_rows(path, h, w, 8, c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, rows);
}

void write_png_gray8(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::size_t height,
                     std::size_t width) {
  std::vector<std::vector<std::uint8_t>> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y].assign(pixels.begin() + static_cast<std::ptrdiff_t>(y * width),
                                                          pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * width));
  write_png_rows(path, height, width, 8, PNG_COLOR_TYPE_GRAY, rows);
}

void write_png_gray1(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::size_t height,
                     std::size_t width) {
  std::vector<std::vector<std::uint8_t>> rows(height, std::vector<std::uint8_t>((width + 7) / 8, 0));
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      if (pixels[y * width + x] != 0) rows[y][x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
  write_png_rows(path, height, width, 1, PNG_COLOR_TYPE_GRAY, rows);
}

}  // namespace namea::data
