#include "namea/core/gso.hpp"

#include <cmath>

#include "namea/errors.hpp"
#include "namea/simd/kernels.hpp"

namespace namea::core {

void GsoConfig::validate() const {
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) throw ConfigError("must be >= 0", "lambda1");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw ConfigError("must be >= 0", "lambda2");
}

std::vector<std::size_t> cnn_scaled_layers(std::size_t layer_count) {
  if (layer_count < 3) throw ConfigError("layer-wise scaling needs L >= 3, got " + std::to_string(layer_count), "layer_count");
  const std::size_t lo = (layer_count + 2) / 3;
  const std::size_t hi = (2 * layer_count) / 3;
  std::vector<std::size_t> out;
  for (std::size_t l = lo; l <= hi; ++l) out.push_back(l);
  return out;
}

double cnn_layer_factor(std::size_t layer, std::size_t layer_count, double lambda1, double lambda2) {
  return lambda1 + lambda2 * (static_cast<double>(layer_count) / static_cast<double>(layer));
}

void gso_scale_cnn(std::span<Tensor> layer_grads, double lambda1, double lambda2) {
  const std::size_t count = layer_grads.size();
  for (std::size_t l : cnn_scaled_layers(count)) {
    Tensor& g = layer_grads[l - 1];
    simd::active().scale(static_cast<float>(cnn_layer_factor(l, count, lambda1, lambda2)), g.data(), g.size());
  }
}

std::vector<double> vit_channel_factors(std::span<const double> magnitudes) {
  const std::size_t c = magnitudes.size();
  std::vector<double> factors(c, 1.0);
  if (c == 0) return factors;
  double mean = 0.0;
  for (double m : magnitudes) mean += m;
  mean /= static_cast<double>(c);
  double var = 0.0;
  for (double m : magnitudes) var += (m - mean) * (m - mean);
  const double stddev = std::sqrt(var / static_cast<double>(c));
  if (stddev < 1e-12) return factors;
  for (std::size_t i = 0; i < c; ++i) {
    if (magnitudes[i] < mean) factors[i] = std::tanh(std::fabs((magnitudes[i] - mean) / stddev));
  }
  return factors;
}

std::vector<double> gso_scale_vit(std::span<float> grads, std::size_t tokens, std::size_t channels) {
  if (grads.size() != tokens * channels) throw UsageError("gso_scale_vit: size mismatch");
  std::vector<double> mags(channels, 0.0);
  for (std::size_t t = 0; t < tokens; ++t)
    for (std::size_t c = 0; c < channels; ++c) mags[c] += std::fabs(static_cast<double>(grads[t * channels + c]));
  for (double& m : mags) m /= static_cast<double>(tokens);
  const std::vector<double> factors = vit_channel_factors(mags);
  for (std::size_t t = 0; t < tokens; ++t)
    for (std::size_t c = 0; c < channels; ++c) grads[t * channels + c] *= static_cast<float>(factors[c]);
  return factors;
}

}  // namespace namea::core
