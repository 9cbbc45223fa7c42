#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "namea/tensor.hpp"

namespace namea::core {

/// Backward-signal scaling applied during the meta-testing gradient.
struct GsoConfig {
  double lambda1 = 1.0;  // baseline scale
  double lambda2 = 0.1;  // depth-dependent enhancement
  bool enabled = true;

  void validate() const;
};

/// Block indices l (1-based) in [ceil(L/3), floor(2L/3)]. Throws for L < 3.
std::vector<std::size_t> cnn_scaled_layers(std::size_t layer_count);

/// lambda(l) = lambda1 + lambda2 * L / l
double cnn_layer_factor(std::size_t layer, std::size_t layer_count, double lambda1, double lambda2);

/// Scales `layer_grads[l-1]` by lambda(l) for every l in the scaled range;
/// other entries are left alone. `layer_grads.size()` is L.
void gso_scale_cnn(std::span<Tensor> layer_grads, double lambda1, double lambda2);

/// Per-channel shrink factors for mean-absolute channel magnitudes: channels
/// strictly below the mean get tanh(|(mag - mean) / std|), the rest 1.
/// All ones when the std is below 1e-12.
std::vector<double> vit_channel_factors(std::span<const double> magnitudes);

/// In-place channel-wise shrink of a [tokens, channels] gradient block.
/// Returns the factors applied.
std::vector<double> gso_scale_vit(std::span<float> grads, std::size_t tokens, std::size_t channels);

}  // namespace namea::core
