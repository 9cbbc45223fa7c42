#include "namea/attack/primitives.hpp"

#include <algorithm>
#include <cmath>

#include "namea/errors.hpp"
#include "namea/image_ops.hpp"
#include "namea/simd/kernels.hpp"

namespace namea::attack {
namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw UsageError(std::string(what) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor clip_to_ball(const Tensor& x_adv, const Tensor& x_clean, float epsilon) {
  if (!(epsilon >= 0.0f)) throw ConfigError("must be >= 0", "epsilon");
  require_same(x_adv, x_clean, "clip_to_ball");
  Tensor out(x_adv.shape());
  simd::active().clip_ball(x_adv.data(), x_clean.data(), epsilon, out.data(), out.size());
  return out;
}

Tensor sign_step(const Tensor& x, const Tensor& g, float alpha) {
  require_same(x, g, "sign_step");
  Tensor out(x.shape());
  simd::active().sign_step(x.data(), g.data(), alpha, out.data(), out.size());
  return out;
}

Tensor momentum_accumulate(const Tensor& m_prev, const Tensor& g, float mu) {
  require_same(m_prev, g, "momentum_accumulate");
  const auto& k = simd::active();
  Tensor m = m_prev;
  k.scale(mu, m.data(), m.size());
  const std::size_t n = g.rank() == 0 ? 0 : g.dim(0), per = g.item_size();
  for (std::size_t i = 0; i < n; ++i) {
    const double l1 = k.abs_sum(g.item(i).data(), per);
    if (l1 == 0.0) continue;
    k.axpy(static_cast<float>(1.0 / l1), g.item(i).data(), m.item(i).data(), per);
  }
  return m;
}

void check_budget(const Tensor& x_adv, const Tensor& x_clean, float epsilon) {
  require_same(x_adv, x_clean, "check_budget");
  for (std::size_t i = 0; i < x_adv.size(); ++i) {
    const float v = x_adv[i];
    if (!(v >= 0.0f && v <= 1.0f) || std::fabs(v - x_clean[i]) > epsilon + 1e-6f) {
      throw Error("perturbation budget violated at element " + std::to_string(i));
    }
  }
}

DiTransform::DiTransform(double prob, double scale) : prob_(prob), scale_(scale) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw ConfigError("must lie in [0,1]", "di_prob");
  if (!(scale >= 1.0)) throw ConfigError("must be >= 1", "di_scale");
}

std::vector<DiPlan> DiTransform::sample(std::size_t batch, std::size_t side, Rng& rng) const {
  std::vector<DiPlan> plans(batch);
  const auto canvas = static_cast<std::size_t>(std::floor(scale_ * static_cast<double>(side)));
  for (auto& p : plans) {
    if (prob_ <= 0.0 || !rng.bernoulli(prob_)) continue;
    p.active = true;
    p.canvas = canvas;
    p.side = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(side), static_cast<std::int64_t>(canvas)));
    const auto slack = static_cast<std::int64_t>(canvas - p.side);
    p.top = static_cast<std::size_t>(rng.uniform_int(0, slack));
    p.left = static_cast<std::size_t>(rng.uniform_int(0, slack));
  }
  return plans;
}

Tensor DiTransform::apply(const Tensor& x, const std::vector<DiPlan>& plans) const {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (plans.size() != n) throw UsageError("DiTransform::apply: plan count mismatch");
  Tensor out = x;
  std::vector<float> resized, canvas;
  for (std::size_t i = 0; i < n; ++i) {
    const DiPlan& p = plans[i];
    if (!p.active) continue;
    resized.assign(p.side * p.side, 0.0f);
    canvas.assign(p.canvas * p.canvas, 0.0f);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* src = x.item(i).data() + ch * h * w;
      resize_bilinear(src, h, w, resized.data(), p.side, p.side);
      std::fill(canvas.begin(), canvas.end(), 0.0f);
      for (std::size_t y = 0; y < p.side; ++y) {
        std::copy_n(resized.data() + y * p.side, p.side, canvas.data() + (p.top + y) * p.canvas + p.left);
      }
      resize_bilinear(canvas.data(), p.canvas, p.canvas, out.item(i).data() + ch * h * w, h, w);
    }
  }
  return out;
}

Tensor DiTransform::adjoint(const Tensor& g, const std::vector<DiPlan>& plans) const {
  const std::size_t n = g.dim(0), c = g.dim(1), h = g.dim(2), w = g.dim(3);
  if (plans.size() != n) throw UsageError("DiTransform::adjoint: plan count mismatch");
  Tensor out = g;
  std::vector<float> resized, canvas;
  for (std::size_t i = 0; i < n; ++i) {
    const DiPlan& p = plans[i];
    if (!p.active) continue;
    for (std::size_t ch = 0; ch < c; ++ch) {
      canvas.assign(p.canvas * p.canvas, 0.0f);
      resized.assign(p.side * p.side, 0.0f);
      resize_bilinear_adjoint(g.item(i).data() + ch * h * w, h, w, canvas.data(), p.canvas, p.canvas);
      for (std::size_t y = 0; y < p.side; ++y) {
        std::copy_n(canvas.data() + (p.top + y) * p.canvas + p.left, p.side, resized.data() + y * p.side);
      }
      float* dst = out.item(i).data() + ch * h * w;
      std::fill(dst, dst + h * w, 0.0f);
      resize_bilinear_adjoint(resized.data(), p.side, p.side, dst, h, w);
    }
  }
  return out;
}

Tensor di_transform(const Tensor& x, double prob, Rng& rng) {
  DiTransform di(prob);
  return di.apply(x, di.sample(x.dim(0), x.dim(2), rng));
}

std::vector<float> gaussian_kernel(std::size_t kernel_size) {
  if (kernel_size == 0 || kernel_size % 2 == 0) throw ConfigError("must be odd and >= 1", "ti_kernel");
  const double sigma = static_cast<double>(kernel_size) / 3.0;
  const auto r = static_cast<std::ptrdiff_t>(kernel_size / 2);
  std::vector<double> k1(kernel_size);
  for (std::ptrdiff_t i = -r; i <= r; ++i) k1[i + r] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
  double total = 0.0;
  for (double a : k1)
    for (double b : k1) total += a * b;
  std::vector<float> k(kernel_size * kernel_size);
  for (std::size_t y = 0; y < kernel_size; ++y)
    for (std::size_t x = 0; x < kernel_size; ++x) k[y * kernel_size + x] = static_cast<float>(k1[y] * k1[x] / total);
  return k;
}

Tensor ti_smooth(const Tensor& g, std::size_t kernel_size) {
  const std::vector<float> k = gaussian_kernel(kernel_size);
  if (kernel_size == 1) return g;
  if (g.rank() != 4) throw UsageError("ti_smooth expects [N,C,H,W]");
  const auto h = static_cast<std::ptrdiff_t>(g.dim(2)), w = static_cast<std::ptrdiff_t>(g.dim(3));
  const auto r = static_cast<std::ptrdiff_t>(kernel_size / 2);
  const std::size_t planes = g.dim(0) * g.dim(1);
  Tensor out(g.shape());
  for (std::size_t p = 0; p < planes; ++p) {
    const float* src = g.data() + p * static_cast<std::size_t>(h * w);
    float* dst = out.data() + p * static_cast<std::size_t>(h * w);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
          const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + dy, 0, h - 1);
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + dx, 0, w - 1);
            acc += static_cast<double>(k[static_cast<std::size_t>((dy + r) * static_cast<std::ptrdiff_t>(kernel_size) + dx + r)]) *
                   src[yy * w + xx];
          }
        }
        dst[y * w + x] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

}  // namespace namea::attack
