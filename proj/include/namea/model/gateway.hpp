#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "namea/core/gso.hpp"
#include "namea/nn/network.hpp"
#include "namea/tensor.hpp"

namespace namea::model {

using nn::Family;

/// One classifier with the metadata the attack needs: family, block count L,
/// attention tap site and the channel width C at that site.
class ModelHandle {
 public:
  ModelHandle(std::string id, nn::Network net, std::string tap_layer = {});
  ModelHandle(ModelHandle&&) noexcept = default;
  ModelHandle& operator=(ModelHandle&&) noexcept = default;

  const std::string& id() const noexcept { return id_; }
  Family family() const noexcept { return net_.family(); }
  std::size_t layer_count() const noexcept { return net_.layer_count(); }
  const std::string& tap_layer() const noexcept { return tap_; }
  std::size_t channel_count() const noexcept { return channels_; }
  Shape input_shape() const { return net_.input_shape(); }
  std::size_t num_classes() const noexcept { return net_.num_classes(); }
  const nn::Network& network() const noexcept { return net_; }

  bool gso_attached() const noexcept { return gso_.has_value(); }
  const std::optional<core::GsoConfig>& gso() const noexcept { return gso_; }

 private:
  friend class GsoAttachment;
  std::string id_;
  nn::Network net_;
  std::string tap_;
  std::size_t channels_;
  std::optional<core::GsoConfig> gso_;
};

/// Forward pass kept open for a custom backward from the logits. Installs
/// the model's GSO hook (if attached) for the backward half.
class GradientPass {
 public:
  GradientPass(const ModelHandle& model, const Tensor& batch, std::string capture_site = {});

  const Tensor& logits() const noexcept { return logits_; }
  /// d(objective)/d(input) given d(objective)/d(logits). Single use.
  Tensor backward(const Tensor& grad_logits, std::string_view context = {});
  const nn::PassContext& context() const noexcept { return ctx_; }

 private:
  const ModelHandle* model_;
  nn::PassContext ctx_;
  Tensor logits_;
  bool done_ = false;
};

Tensor forward_logits(const ModelHandle& model, const Tensor& batch);

/// Gradient of loss_scale * sum_i CE(f(x_i), y_i) with respect to the input.
Tensor input_gradient(const ModelHandle& model, const Tensor& batch, std::span<const int> labels,
                      float loss_scale = 1.0f, std::string_view context = {});

/// Softmax cross-entropy gradient w.r.t. logits, per row (sum reduction).
Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels);
std::vector<double> cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Tap activations and d f(x)[y] / d activations, spatial layout [N,C,h,w].
/// ViT token features drop the class token and are laid out on the patch grid.
struct FeatureBundle {
  Tensor features;
  Tensor feature_grads;
  std::size_t height = 0, width = 0;
};

FeatureBundle feature_and_grad(const ModelHandle& model, const Tensor& batch, std::span<const int> labels);

/// Scoped GSO hook. Destruction (or detach()) restores plain backprop.
class GsoAttachment {
 public:
  GsoAttachment() = default;
  GsoAttachment(ModelHandle& model, const core::GsoConfig& config);
  GsoAttachment(GsoAttachment&& other) noexcept;
  GsoAttachment& operator=(GsoAttachment&& other) noexcept;
  GsoAttachment(const GsoAttachment&) = delete;
  GsoAttachment& operator=(const GsoAttachment&) = delete;
  ~GsoAttachment();

  void detach() noexcept;
  bool attached() const noexcept { return model_ != nullptr; }

 private:
  ModelHandle* model_ = nullptr;
};

/// Layer-wise rule for CNNs, channel-wise rule for ViTs. Throws UsageError
/// when a hook is already attached and ConfigError when the model cannot
/// take the rule (e.g. a CNN with L < 3).
GsoAttachment attach_gso(ModelHandle& model, const core::GsoConfig& config);

/// The backward hook that an attached GSO config installs; exposed so the
/// scaling can be exercised on a standalone PassContext.
nn::BackwardHook make_gso_hook(const ModelHandle& model, const core::GsoConfig& config);

// --- registry -------------------------------------------------------------------

struct RegistryEntry {
  std::string id;
  std::filesystem::path weights;
  Family family = Family::CNN;
  std::string tap_layer;
  std::size_t layer_count = 0;
  std::size_t channels = 0;
};

/// JSON file: {"models": [{"id", "weights", "family", "tap_layer", "layer_count", "channels"}]}.
/// Relative weight paths resolve against the registry's directory.
std::vector<RegistryEntry> load_registry(const std::filesystem::path& path);
void save_registry(const std::filesystem::path& path, std::span<const RegistryEntry> entries);

/// Loads weights and checks them against the entry's declared metadata.
ModelHandle load_model(const RegistryEntry& entry);
std::vector<ModelHandle> load_models(std::span<const RegistryEntry> registry, std::span<const std::string> ids);

}  // namespace namea::model
