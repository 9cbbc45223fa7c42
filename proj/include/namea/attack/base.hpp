#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "namea/attack/primitives.hpp"
#include "namea/config.hpp"
#include "namea/model/gateway.hpp"

namespace namea::attack {

/// Attack iterate with its budget.
struct AdversarialState {
  Tensor x_clean;
  Tensor x_adv;
  float epsilon = 0.0f;
  float step_size = 0.0f;
  Tensor momentum;  // empty unless the base attack uses momentum
  std::size_t iteration = 0;
};

/// Outer-gradient post-processing of the base attack: TI smoothing then
/// MI momentum, in that order.
class GradientProcessor {
 public:
  GradientProcessor(const AttackConfig& cfg, const Shape& shape);
  Tensor process(const Tensor& g);
  const Tensor& momentum() const noexcept { return momentum_; }

 private:
  bool ti_, mi_;
  std::size_t kernel_;
  float mu_;
  Tensor momentum_;
};

/// Gradient of the averaged-ensemble loss w.r.t. the input: CE of the mean
/// softmax (PROBABILITIES) or softmax CE of the mean logits (LOGITS), summed
/// over the batch.
Tensor ensemble_gradient(std::span<const model::ModelHandle> models, const Tensor& x, std::span<const int> labels,
                         EnsembleMode mode);

/// Generic iterative loop: T steps of x <- clip(x + alpha sign(process(grad(DI(x))))).
using GradientFn = std::function<Tensor(const Tensor& x)>;
Tensor run_base_attack(const Tensor& x, const AttackConfig& cfg, const GradientFn& gradient);

/// Ens baseline: the configured base attack on the averaged ensemble.
Tensor ens_attack(const Tensor& x, std::span<const int> labels, std::span<const model::ModelHandle> models,
                  const AttackConfig& cfg);

}  // namespace namea::attack
