#pragma once

#include <cstddef>
#include <vector>

#include "namea/rng.hpp"
#include "namea/tensor.hpp"

namespace namea::attack {

/// Clamp of x_adv into [x_clean - eps, x_clean + eps] intersected with [0,1].
Tensor clip_to_ball(const Tensor& x_adv, const Tensor& x_clean, float epsilon);

/// x + alpha * sign(g), sign(0) = 0.
Tensor sign_step(const Tensor& x, const Tensor& g, float alpha);

/// m = mu * m_prev + g / |g|_1, the norm taken per image (leading axis).
/// Images with |g|_1 = 0 contribute no normalised term.
Tensor momentum_accumulate(const Tensor& m_prev, const Tensor& g, float mu);

/// Throws Error if x_adv leaves the eps-ball (tolerance 1e-6) or [0,1].
void check_budget(const Tensor& x_adv, const Tensor& x_clean, float epsilon);

/// Input diversity: per image, with probability p, resize to a random side
/// in [S, floor(scale * S)], zero-pad at a random offset to floor(scale * S)
/// and resize back to S.
struct DiPlan {
  bool active = false;
  std::size_t side = 0;    // resized side
  std::size_t canvas = 0;  // padded side
  std::size_t top = 0, left = 0;
};

class DiTransform {
 public:
  DiTransform(double prob, double scale = 1.1);

  /// Draws one plan per image of a [N,C,S,S] batch.
  std::vector<DiPlan> sample(std::size_t batch, std::size_t side, Rng& rng) const;
  Tensor apply(const Tensor& x, const std::vector<DiPlan>& plans) const;
  /// Transpose of apply for the same plans (maps an input-space gradient of
  /// the transformed batch back onto the original batch).
  Tensor adjoint(const Tensor& g, const std::vector<DiPlan>& plans) const;

  double prob() const noexcept { return prob_; }

 private:
  double prob_;
  double scale_;
};

Tensor di_transform(const Tensor& x, double prob, Rng& rng);

/// Normalised k x k Gaussian, sigma = k / 3. Throws ConfigError for even k.
std::vector<float> gaussian_kernel(std::size_t kernel_size);

/// Depthwise convolution with gaussian_kernel over every [H,W] plane of a
/// [N,C,H,W] tensor, same-size output, edge-replicated borders.
Tensor ti_smooth(const Tensor& g, std::size_t kernel_size);

}  // namespace namea::attack
