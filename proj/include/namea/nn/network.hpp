#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "namea/nn/layers.hpp"

namespace namea::nn {

enum class Family { CNN, VIT };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

struct CnnBlockSpec {
  std::size_t channels = 16;
  std::size_t stride = 1;
  bool residual = false;
};

/// Architecture description stored alongside the weights in a checkpoint.
struct ArchSpec {
  std::string name;
  Family family = Family::CNN;
  std::size_t in_channels = 3;
  std::size_t image_size = 32;
  std::size_t num_classes = 10;
  std::vector<CnnBlockSpec> blocks;  // CNN
  std::size_t patch = 4;             // ViT fields below
  std::size_t dim = 32;
  std::size_t depth = 2;
  std::size_t heads = 2;
  std::size_t mlp_hidden = 64;
  bool mean_pool = false;          // classify from the token mean instead of the class token
  std::size_t stem_channels = 0;  // optional 3x3 conv + ReLU before the patch embedding

  nlohmann::json to_json() const;
  static ArchSpec from_json(const nlohmann::json& j);
};

/// Sequential classifier built from an ArchSpec. CNNs are conv blocks
/// ("block1".."blockL") followed by global pooling and a dense head; ViTs
/// are a patch embedding, L transformer blocks and a class-token head.
class Network {
 public:
  explicit Network(ArchSpec spec);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void initialize(std::uint64_t seed);
  Network clone() const;

  const ArchSpec& arch() const noexcept { return spec_; }
  Family family() const noexcept { return spec_.family; }
  Shape input_shape() const { return {spec_.in_channels, spec_.image_size, spec_.image_size}; }
  std::size_t num_classes() const noexcept { return spec_.num_classes; }

  /// Number of blocks L (conv blocks or transformer blocks).
  std::size_t layer_count() const noexcept { return block_sites_.size(); }
  /// Block output sites in depth order; entry l-1 is block l.
  const std::vector<std::string>& block_sites() const noexcept { return block_sites_; }
  /// Last conv block output (CNN) or the final block's pre-attention norm (ViT).
  std::string default_tap_site() const;
  bool has_site(std::string_view site) const;
  /// Channel width at the default tap.
  std::size_t tap_channels() const;

  Tensor forward(const Tensor& x, PassContext& ctx) const;
  Tensor backward(const Tensor& grad_logits, PassContext& ctx) const;

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  std::size_t parameter_count() const;

 private:
  ArchSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::string> block_sites_;
  std::vector<std::string> sites_;
};

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace namea::nn
