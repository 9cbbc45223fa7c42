#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "namea/model/gateway.hpp"
#include "namea/rng.hpp"
#include "namea/tensor.hpp"

namespace namea::attention {

/// Per-pixel relevance [H,W] in [0,1].
struct AttentionMap {
  Tensor values;
  std::string source_model;
  std::string source_tag;
};

/// {0,1} mask [H,W] and the threshold that produced it.
struct BinaryMask {
  Tensor values;
  float threshold = 0.0f;

  /// 1 - M, elementwise.
  BinaryMask complement() const;
  std::size_t count() const;
};

enum class FillMode { Gaussian, Zeros, Ones };
FillMode fill_mode_from_string(std::string_view s);
std::string_view to_string(FillMode m);

/// (H - min) / (max - min); all zeros when the map is constant.
AttentionMap normalize_map(const Tensor& raw);

/// ReLU(sum_c alpha_c A_c) at tap resolution, alpha_c the spatial mean of the
/// feature gradients. Output [N,h,w].
Tensor gradcam_raw(const model::FeatureBundle& bundle);

/// Grad-CAM maps at input resolution, min-max normalised, one per image.
std::vector<AttentionMap> gradcam(const model::ModelHandle& model, const Tensor& batch, std::span<const int> labels);
AttentionMap gradcam(const model::ModelHandle& model, const Tensor& image, int label);

/// M = [H >= eta], and its complement.
std::pair<BinaryMask, BinaryMask> attention_mask(const AttentionMap& map, float eta);

/// Keeps the pixels with the top `ratio` fraction of attention (ties at the
/// cut included). Used by the masking-ratio experiment, not by the attack.
BinaryMask quantile_mask(const AttentionMap& map, double ratio);

/// (1 - M) * image + M * fill, clipped to [0,1]; `image` is [C,H,W] and the
/// mask broadcasts over channels. Gaussian mode draws one N(0,1) value per
/// element of the image, in memory order, whether masked or not.
Tensor mask_fill(const Tensor& image, const BinaryMask& mask, FillMode mode, Rng& rng);

/// Intersection over union; 0 when both masks are empty.
double overlap_ratio(const BinaryMask& a, const BinaryMask& b);

void write_heatmap_png(const std::filesystem::path& path, const AttentionMap& map);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
/// `{model_id}_{image_tag}_{kind}.png`
std::filesystem::path heatmap_filename(const std::filesystem::path& dir, const std::string& model_id,
                                       const std::string& image_tag, const std::string& kind);

}  // namespace namea::attention
