#include "namea/attack/base.hpp"

#include <cmath>

#include "namea/errors.hpp"
#include "namea/simd/kernels.hpp"

namespace namea::attack {

GradientProcessor::GradientProcessor(const AttackConfig& cfg, const Shape& shape)
    : ti_(uses_ti(cfg.base_attack)),
      mi_(uses_momentum(cfg.base_attack)),
      kernel_(cfg.ti_kernel),
      mu_(cfg.momentum),
      momentum_(mi_ ? Tensor(shape) : Tensor()) {}

Tensor GradientProcessor::process(const Tensor& g) {
  Tensor out = ti_ ? ti_smooth(g, kernel_) : g;
  if (mi_) {
    momentum_ = momentum_accumulate(momentum_, out, mu_);
    out = momentum_;
  }
  return out;
}

Tensor ensemble_gradient(std::span<const model::ModelHandle> models, const Tensor& x, std::span<const int> labels,
                         EnsembleMode mode) {
  if (models.empty()) throw ConfigError("ensemble needs at least one model", "surrogates");
  if (models.size() == 1) return model::input_gradient(models[0], x, labels);

  const std::size_t m_count = models.size(), n = x.dim(0);
  std::vector<model::GradientPass> passes;
  passes.reserve(m_count);
  for (const auto& m : models) passes.emplace_back(m, x);
  const std::size_t k = passes[0].logits().dim(1);

  std::vector<Tensor> grads(m_count, Tensor({n, k}));
  if (mode == EnsembleMode::Logits) {
    Tensor mean({n, k});
    for (const auto& p : passes) simd::active().axpy(1.0f / static_cast<float>(m_count), p.logits().data(), mean.data(), mean.size());
    Tensor g = model::cross_entropy_grad(mean, labels);
    simd::active().scale(1.0f / static_cast<float>(m_count), g.data(), g.size());
    for (auto& gm : grads) gm = g;
  } else {
    // L = -log(mean_m p_m[y]); dL/dz_m = w_m (p_m - onehot), w_m = p_m[y] / sum_j p_j[y].
    std::vector<std::vector<double>> probs(m_count, std::vector<double>(n * k));
    for (std::size_t m = 0; m < m_count; ++m) {
      const Tensor& z = passes[m].logits();
      for (std::size_t i = 0; i < n; ++i) {
        const float* zi = z.data() + i * k;
        double mx = zi[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(zi[j]));
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(zi[j] - mx);
        for (std::size_t j = 0; j < k; ++j) probs[m][i * k + j] = std::exp(zi[j] - mx) / s;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = static_cast<std::size_t>(labels[i]);
      double total = 0.0;
      for (std::size_t m = 0; m < m_count; ++m) total += probs[m][i * k + y];
      for (std::size_t m = 0; m < m_count; ++m) {
        const double w = probs[m][i * k + y] / total;
        for (std::size_t j = 0; j < k; ++j) {
          const double onehot = j == y ? 1.0 : 0.0;
          grads[m][i * k + j] = static_cast<float>(w * (probs[m][i * k + j] - onehot));
        }
      }
    }
  }

  Tensor total(x.shape());
  for (std::size_t m = 0; m < m_count; ++m) {
    const Tensor g = passes[m].backward(grads[m], "ensemble");
    simd::active().add(total.data(), g.data(), total.data(), total.size());
  }
  return total;
}

Tensor run_base_attack(const Tensor& x, const AttackConfig& cfg, const GradientFn& gradient) {
  cfg.validate();
  AdversarialState st{x, x, cfg.epsilon, cfg.effective_outer_step(), {}, 0};
  const std::size_t iters = cfg.effective_outer_iters();
  if (iters == 0 || cfg.epsilon == 0.0f) return x;
  GradientProcessor proc(cfg, x.shape());
  const bool di = uses_di(cfg.base_attack);
  const DiTransform transform(cfg.di_prob, cfg.di_scale);
  Rng di_rng = Rng::substream(cfg.seed, "di");
  for (; st.iteration < iters; ++st.iteration) {
    Tensor g;
    if (di) {
      const auto plans = transform.sample(x.dim(0), x.dim(2), di_rng);
      g = transform.adjoint(gradient(transform.apply(st.x_adv, plans)), plans);
    } else {
      g = gradient(st.x_adv);
    }
    st.x_adv = clip_to_ball(sign_step(st.x_adv, proc.process(g), st.step_size), st.x_clean, st.epsilon);
  }
  check_budget(st.x_adv, st.x_clean, st.epsilon);
  return st.x_adv;
}

Tensor ens_attack(const Tensor& x, std::span<const int> labels, std::span<const model::ModelHandle> models,
                  const AttackConfig& cfg) {
  if (models.empty()) throw ConfigError("ensemble needs at least one model", "surrogates");
  return run_base_attack(x, cfg, [&](const Tensor& xi) {
    return ensemble_gradient(models, xi, labels, cfg.ensemble_mode);
  });
}

}  // namespace namea::attack
