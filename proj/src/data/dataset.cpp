#include "namea/data/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "namea/data/image_io.hpp"
#include "namea/errors.hpp"
#include "namea/rng.hpp"

namespace namea::data {
namespace {

using Color = std::array<float, 3>;

Color random_color(Rng& rng) {
  return {static_cast<float>(rng.uniform01()), static_cast<float>(rng.uniform01()),
          static_cast<float>(rng.uniform01())};
}

/// Inside test for shape `kind` centred at (cx, cy) with radius r.
bool inside(int kind, double dx, double dy, double r) {
  const double ax = std::fabs(dx), ay = std::fabs(dy);
  switch (kind) {
    case 0: return dx * dx + dy * dy <= r * r;  // disc
    case 1: return ax <= r * 0.85 && ay <= r * 0.85;  // square
    case 2: return dy <= r * 0.8 && dy >= -r && ax <= (dy + r) * 0.58;  // triangle, apex up
    case 3: return (ax <= r * 0.35 && ay <= r) || (ay <= r * 0.35 && ax <= r);  // plus
    default: {  // ring
      const double d = std::sqrt(dx * dx + dy * dy);
      return d <= r && d >= r * 0.55;
    }
  }
}

/// Two-tone texture of class `texture` at pixel (x, y); true selects the
/// second tone. Texture -1 is solid.
bool texture_alt(int texture, double x, double y, double period) {
  const auto band = [period](double v) { return std::fmod(std::floor(v / period) + 1e6, 2.0) != 0.0; };
  switch (texture) {
    case 0: return band(y);                                   // horizontal stripes
    case 1: return band(x);                                   // vertical stripes
    case 2: return band((x + y) / std::numbers::sqrt2);        // diagonal stripes
    case 3: return band((x - y) / std::numbers::sqrt2);        // anti-diagonal stripes
    case 4: return band(x) != band(y);                        // checkerboard
    case 5: return band(x) && band(y);  // dots
    case 6: return band((x + y) / std::numbers::sqrt2) != band((x - y) / std::numbers::sqrt2);  // diamonds
    case 7: return band(y + std::fabs(std::fmod(x, 2 * period) - period));  // zigzag
    case 8: return false;  // solid
    case 9: return std::fmod(std::floor(x), period * 2) < 1.0 || std::fmod(std::floor(y), period * 2) < 1.0;  // grid lines
    default: return false;
  }
}

void paint_shape(Tensor& img, int kind, double cx, double cy, double r, const Color& a, const Color& b, int texture,
                 double period) {
  const std::size_t s = img.dim(1);
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      if (!inside(kind, px - cx, py - cy, r)) continue;
      const Color& c = texture_alt(texture, px, py, period) ? b : a;
      for (std::size_t ch = 0; ch < 3; ++ch) img[(ch * s + y) * s + x] = c[ch];
    }
  }
}

}  // namespace

ImageBatch generate_synthetic(std::size_t per_class, std::uint64_t seed, const SynthOptions& opt) {
  const std::size_t s = opt.image_size, total = per_class * kSynthClasses;
  ImageBatch out{Tensor({total, 3, s, s}), std::vector<int>(total), std::vector<std::string>(total)};
  Rng rng = Rng::substream(seed, "synthetic");
  const double sd = static_cast<double>(s);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const int label = static_cast<int>(idx % kSynthClasses);
    Tensor img({3, s, s});
    const Color c0 = random_color(rng), c1 = random_color(rng);
    const bool vertical = rng.bernoulli(0.5);
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        const double tpos = (vertical ? static_cast<double>(y) : static_cast<double>(x)) / (sd - 1.0);
        for (std::size_t ch = 0; ch < 3; ++ch) {
          img[(ch * s + y) * s + x] = static_cast<float>((1.0 - tpos) * c0[ch] + tpos * c1[ch]) * 0.8f + 0.1f;
        }
      }

    const std::size_t distractors = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(opt.max_distractors)));
    for (std::size_t d = 0; d < distractors; ++d) {
      const int kind = static_cast<int>(rng.uniform_int(0, 4));
      const double r = sd * (0.08 + 0.05 * rng.uniform01());
      const double cx = r + rng.uniform01() * (sd - 2 * r), cy = r + rng.uniform01() * (sd - 2 * r);
      const Color c = random_color(rng);
      paint_shape(img, kind, cx, cy, r, c, c, -1, 1.0);
    }

    const int kind = static_cast<int>(rng.uniform_int(0, 4));
    const double r = sd * (opt.min_radius + (opt.max_radius - opt.min_radius) * rng.uniform01());
    const double cx = r + rng.uniform01() * (sd - 2 * r), cy = r + rng.uniform01() * (sd - 2 * r);
    Color a = random_color(rng), b{};
    for (std::size_t ch = 0; ch < 3; ++ch) b[ch] = a[ch] > 0.5f ? a[ch] - 0.45f : a[ch] + 0.45f;
    const double period = opt.min_period + (opt.max_period - opt.min_period) * rng.uniform01();
    paint_shape(img, kind, cx, cy, r, a, b, label, period);

    for (float& v : img.values()) v = std::clamp(v + opt.noise * rng.normal(), 0.0f, 1.0f);
    std::copy(img.values().begin(), img.values().end(), out.images.item(idx).begin());
    out.labels[idx] = label;
    char tag[32];
    std::snprintf(tag, sizeof tag, "%06zu", idx);
    out.tags[idx] = tag;
  }
  return out;
}

DatasetIndex index_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw UsageError("dataset directory not found: " + root.string());
  DatasetIndex idx;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    std::vector<DatasetEntry> files;
    const int label = static_cast<int>(idx.class_names.size());
    for (const auto& e : fs::directory_iterator(d)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".png" || ext == ".ppm" || ext == ".pgm")) files.push_back({e.path(), label});
    }
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    if (files.empty()) spdlog::warn("class directory {} is empty", d.string());
    idx.class_names.push_back(d.filename().string());
    idx.by_class.push_back(std::move(files));
  }
  return idx;
}

ImageBatch load_entries(const std::vector<DatasetEntry>& entries) {
  std::vector<Tensor> images;
  ImageBatch out;
  images.reserve(entries.size());
  for (const auto& e : entries) {
    images.push_back(read_image(e.path));
    if (!images.back().same_shape(images.front())) throw UsageError("image size differs: " + e.path.string());
    out.labels.push_back(e.label);
    out.tags.push_back(e.path.stem().string());
  }
  if (!images.empty()) out.images = stack(images);
  return out;
}

void write_dataset(const std::filesystem::path& root, const ImageBatch& batch) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto dir = root / ("class_" + std::to_string(batch.labels[i]));
    std::filesystem::create_directories(dir);
    const std::string stem = batch.tags.size() == batch.size() && !batch.tags[i].empty() ? batch.tags[i] : std::to_string(i);
    const Tensor img = batch.images.slice(i, 1).reshaped({batch.images.dim(1), batch.images.dim(2), batch.images.dim(3)});
    write_png(dir / (stem + ".png"), img);
  }
}

std::filesystem::path data_root(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("NAMEA_DATA_ROOT"); env != nullptr && *env != '\0') return env;
  return fallback;
}

}  // namespace namea::data
