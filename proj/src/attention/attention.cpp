#include "namea/attention/attention.hpp"

#include <algorithm>
#include <cmath>

#include "namea/data/image_io.hpp"
#include "namea/errors.hpp"
#include "namea/image_ops.hpp"
#include "namea/simd/kernels.hpp"

namespace namea::attention {

BinaryMask BinaryMask::complement() const {
  BinaryMask out{Tensor(values.shape()), threshold};
  for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = 1.0f - values[i];
  return out;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(values.values().begin(), values.values().end(), 1.0f));
}

FillMode fill_mode_from_string(std::string_view s) {
  if (s == "GAUSSIAN" || s == "gaussian") return FillMode::Gaussian;
  if (s == "ZEROS" || s == "zeros") return FillMode::Zeros;
  if (s == "ONES" || s == "ones") return FillMode::Ones;
  throw ConfigError("unknown fill mode '" + std::string(s) + "'", "fill_mode");
}

std::string_view to_string(FillMode m) {
  switch (m) {
    case FillMode::Gaussian: return "GAUSSIAN";
    case FillMode::Zeros: return "ZEROS";
    case FillMode::Ones: return "ONES";
  }
  return "?";
}

AttentionMap normalize_map(const Tensor& raw) {
  AttentionMap out{Tensor(raw.shape()), {}, {}};
  if (raw.empty()) return out;
  const auto [lo, hi] = std::minmax_element(raw.values().begin(), raw.values().end());
  const float mn = *lo, mx = *hi;
  if (mx > mn) {
    const float range = mx - mn;
    for (std::size_t i = 0; i < raw.size(); ++i) out.values[i] = (raw[i] - mn) / range;
  }
  return out;
}

Tensor gradcam_raw(const model::FeatureBundle& bundle) {
  const Tensor& a = bundle.features;
  const Tensor& g = bundle.feature_grads;
  const std::size_t n = a.dim(0), c = a.dim(1), hw = bundle.height * bundle.width;
  Tensor out({n, bundle.height, bundle.width});
  for (std::size_t i = 0; i < n; ++i) {
    float* h = out.item(i).data();
    for (std::size_t k = 0; k < c; ++k) {
      const float* gk = g.item(i).data() + k * hw;
      double s = 0.0;
      for (std::size_t p = 0; p < hw; ++p) s += gk[p];
      const auto alpha = static_cast<float>(s / static_cast<double>(hw));
      simd::active().axpy(alpha, a.item(i).data() + k * hw, h, hw);
    }
    simd::active().relu_forward(h, h, hw);
  }
  return out;
}

std::vector<AttentionMap> gradcam(const model::ModelHandle& model, const Tensor& batch, std::span<const int> labels) {
  const model::FeatureBundle bundle = model::feature_and_grad(model, batch, labels);
  const Tensor raw = gradcam_raw(bundle);
  const std::size_t n = batch.dim(0), height = batch.dim(2), width = batch.dim(3);
  std::vector<AttentionMap> maps;
  maps.reserve(n);
  Tensor up({height, width});
  for (std::size_t i = 0; i < n; ++i) {
    resize_bilinear(raw.item(i).data(), bundle.height, bundle.width, up.data(), height, width);
    AttentionMap m = normalize_map(up);
    m.source_model = model.id();
    maps.push_back(std::move(m));
  }
  return maps;
}

AttentionMap gradcam(const model::ModelHandle& model, const Tensor& image, int label) {
  const Tensor batch = image.rank() == 4 ? image : image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
  const int labels[] = {label};
  return std::move(gradcam(model, batch, labels).front());
}

std::pair<BinaryMask, BinaryMask> attention_mask(const AttentionMap& map, float eta) {
  if (!(eta >= 0.0f && eta <= 1.0f)) throw ConfigError("must lie in [0,1]", "threshold");
  BinaryMask m{Tensor(map.values.shape()), eta};
  BinaryMask mbar{Tensor(map.values.shape()), eta};
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    const float on = map.values[i] >= eta ? 1.0f : 0.0f;
    m.values[i] = on;
    mbar.values[i] = 1.0f - on;
  }
  return {std::move(m), std::move(mbar)};
}

BinaryMask quantile_mask(const AttentionMap& map, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("must lie in [0,1]", "ratios");
  const std::size_t n = map.values.size();
  const auto keep = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  BinaryMask out{Tensor(map.values.shape()), 0.0f};
  if (keep == 0) {
    out.threshold = 1.0f;
    return out;
  }
  std::vector<float> sorted(map.values.values().begin(), map.values.values().end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep - 1), sorted.end(), std::greater<>());
  const float cut = sorted[keep - 1];
  out.threshold = cut;
  for (std::size_t i = 0; i < n; ++i) out.values[i] = map.values[i] >= cut ? 1.0f : 0.0f;
  return out;
}

Tensor mask_fill(const Tensor& image, const BinaryMask& mask, FillMode mode, Rng& rng) {
  if (image.rank() != 3 || mask.values.rank() != 2 || image.dim(1) != mask.values.dim(0) ||
      image.dim(2) != mask.values.dim(1)) {
    throw UsageError("mask_fill: image " + shape_str(image.shape()) + " vs mask " + shape_str(mask.values.shape()));
  }
  const std::size_t channels = image.dim(0), hw = image.dim(1) * image.dim(2);
  Tensor fill(image.shape(), mode == FillMode::Ones ? 1.0f : 0.0f);
  if (mode == FillMode::Gaussian) {
    for (float& v : fill.values()) v = rng.normal();
  }
  Tensor out(image.shape());
  const auto& k = simd::active();
  for (std::size_t c = 0; c < channels; ++c) {
    k.masked_blend(image.data() + c * hw, mask.values.data(), fill.data() + c * hw, out.data() + c * hw, hw);
  }
  k.clamp01(out.data(), out.size());
  return out;
}

double overlap_ratio(const BinaryMask& a, const BinaryMask& b) {
  if (a.values.shape() != b.values.shape()) throw UsageError("overlap_ratio: mask sizes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool x = a.values[i] != 0.0f, y = b.values[i] != 0.0f;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void write_heatmap_png(const std::filesystem::path& path, const AttentionMap& map) {
  std::vector<std::uint8_t> px(map.values.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map.values[i], 0.0f, 1.0f) * 255.0f));
  }
  data::write_png_gray8(path, px, map.values.dim(0), map.values.dim(1));
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> px(mask.values.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask.values[i] != 0.0f ? 1 : 0;
  data::write_png_gray1(path, px, mask.values.dim(0), mask.values.dim(1));
}

std::filesystem::path heatmap_filename(const std::filesystem::path& dir, const std::string& model_id,
                                       const std::string& image_tag, const std::string& kind) {
  return dir / (model_id + "_" + image_tag + "_" + kind + ".png");
}

}  // namespace namea::attention
