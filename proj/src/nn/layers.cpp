#include "namea/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "namea/errors.hpp"
#include "namea/nn/linalg.hpp"
#include "namea/simd/kernels.hpp"

namespace namea::nn {
namespace {

Param make_param(const std::string& site, const std::string& name, Shape shape, float fill = 0.0f) {
  return Param{site + "." + name, Tensor(std::move(shape), fill)};
}

void fill_normal(Tensor& t, Rng& rng, float stddev) {
  for (float& v : t.values()) v = rng.normal() * stddev;
}

void expect_rank(const Tensor& x, std::size_t rank, const std::string& site) {
  if (x.rank() != rank) throw UsageError(site + ": expected rank " + std::to_string(rank) + ", got " + shape_str(x.shape()));
}

// --- convolution -----------------------------------------------------------

ConvGeometry geometry_for(const Tensor& x, std::size_t out, std::size_t kernel, std::size_t stride) {
  return ConvGeometry{x.dim(1), out, kernel, stride, kernel / 2, x.dim(2), x.dim(3)};
}

Tensor conv_forward(const Tensor& x, const Param& w, const Param& b, const ConvGeometry& g) {
  const std::size_t batch = x.dim(0), ho = g.out_height(), wo = g.out_width(), hw = ho * wo;
  Tensor y({batch, g.out_channels, ho, wo});
  thread_local std::vector<float> cols;
  cols.resize(g.patch_size() * hw);
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(x.item(n).data(), g, cols.data());
    float* out = y.item(n).data();
    matmul(w.value.data(), false, cols.data(), false, out, g.out_channels, hw, g.patch_size());
    for (std::size_t c = 0; c < g.out_channels; ++c) {
      const float bias = b.value[c];
      for (std::size_t i = 0; i < hw; ++i) out[c * hw + i] += bias;
    }
  }
  return y;
}

/// Accumulates the input gradient into `gx` (when non-null) and parameter
/// gradients into the context.
void conv_backward(const Tensor& x, const Tensor& gy, const Param& w, const Param& b, const ConvGeometry& g,
                   Tensor* gx, PassContext& ctx) {
  const std::size_t batch = x.dim(0), hw = g.out_height() * g.out_width(), patch = g.patch_size();
  thread_local std::vector<float> cols, gcols;
  cols.resize(patch * hw);
  gcols.resize(patch * hw);
  Tensor* gw = ctx.wants_param_grads() ? &ctx.param_grad(w) : nullptr;
  Tensor* gb = ctx.wants_param_grads() ? &ctx.param_grad(b) : nullptr;
  for (std::size_t n = 0; n < batch; ++n) {
    const float* gyn = gy.item(n).data();
    if (gw != nullptr) {
      im2col(x.item(n).data(), g, cols.data());
      matmul(gyn, false, cols.data(), true, gw->data(), g.out_channels, patch, hw, true);
      for (std::size_t c = 0; c < g.out_channels; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += gyn[c * hw + i];
        (*gb)[c] += static_cast<float>(s);
      }
    }
    if (gx != nullptr) {
      matmul(w.value.data(), true, gyn, false, gcols.data(), patch, hw, g.out_channels);
      col2im(gcols.data(), g, gx->item(n).data());
    }
  }
}

Tensor relu(const Tensor& z) {
  Tensor y = Tensor::zeros_like(z);
  simd::active().relu_forward(z.data(), y.data(), z.size());
  return y;
}

Tensor relu_grad(const Tensor& z, const Tensor& gy) {
  Tensor gz = Tensor::zeros_like(z);
  simd::active().relu_backward(z.data(), gy.data(), gz.data(), z.size());
  return gz;
}

}  // namespace

// --- row ops -----------------------------------------------------------------

namespace ops {

void linear_forward(const float* x, const Param& w, const Param& b, float* y, std::size_t rows, std::size_t in,
                    std::size_t out) {
  matmul(x, false, w.value.data(), true, y, rows, out, in);
  for (std::size_t r = 0; r < rows; ++r) simd::active().add(y + r * out, b.value.data(), y + r * out, out);
}

void linear_backward(const float* x, const float* gy, const Param& w, const Param& b, float* gx, std::size_t rows,
                     std::size_t in, std::size_t out, PassContext& ctx) {
  if (gx != nullptr) matmul(gy, false, w.value.data(), false, gx, rows, in, out);
  if (ctx.wants_param_grads()) {
    matmul(gy, true, x, false, ctx.param_grad(w).data(), out, in, rows, true);
    Tensor& gb = ctx.param_grad(b);
    for (std::size_t r = 0; r < rows; ++r) simd::active().add(gb.data(), gy + r * out, gb.data(), out);
  }
}

void layernorm_forward(const float* x, const Param& g, const Param& b, float* y, float* xhat, float* rstd,
                       std::size_t rows, std::size_t dim) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * dim;
    double mean = 0.0;
    for (std::size_t i = 0; i < dim; ++i) mean += xr[i];
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (std::size_t i = 0; i < dim; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(dim);
    const float rs = static_cast<float>(1.0 / std::sqrt(var + kLayerNormEps));
    rstd[r] = rs;
    for (std::size_t i = 0; i < dim; ++i) {
      const float h = static_cast<float>(xr[i] - mean) * rs;
      xhat[r * dim + i] = h;
      y[r * dim + i] = h * g.value[i] + b.value[i];
    }
  }
}

void layernorm_backward(const float* gy, const float* xhat, const float* rstd, const Param& g, const Param& b,
                        float* gx, std::size_t rows, std::size_t dim, PassContext& ctx) {
  Tensor* gg = ctx.wants_param_grads() ? &ctx.param_grad(g) : nullptr;
  Tensor* gb = ctx.wants_param_grads() ? &ctx.param_grad(b) : nullptr;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* gyr = gy + r * dim;
    const float* hr = xhat + r * dim;
    double mean_d = 0.0, mean_dh = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = static_cast<double>(gyr[i]) * g.value[i];
      mean_d += d;
      mean_dh += d * hr[i];
      if (gg != nullptr) {
        (*gg)[i] += gyr[i] * hr[i];
        (*gb)[i] += gyr[i];
      }
    }
    mean_d /= static_cast<double>(dim);
    mean_dh /= static_cast<double>(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = static_cast<double>(gyr[i]) * g.value[i];
      gx[r * dim + i] = static_cast<float>(rstd[r] * (d - mean_d - hr[i] * mean_dh));
    }
  }
}

namespace {
constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluA = 0.044715f;
}  // namespace

float gelu(float x) { return 0.5f * x * (1.0f + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

float gelu_grad(float x) {
  const float t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * kGeluC * (1.0f + 3.0f * kGeluA * x * x);
}

}  // namespace ops

// --- ConvBlock -----------------------------------------------------------------

ConvBlock::ConvBlock(std::string site, std::size_t in_channels, std::size_t out_channels, std::size_t stride,
                     bool residual, std::size_t kernel)
    : Layer(std::move(site)),
      in_(in_channels),
      out_(out_channels),
      stride_(stride),
      kernel_(kernel),
      residual_(residual),
      projection_(residual && (stride != 1 || in_channels != out_channels)) {
  w1_ = make_param(this->site(), "conv1.weight", {out_, in_, kernel_, kernel_});
  b1_ = make_param(this->site(), "conv1.bias", {out_});
  if (residual_) {
    w2_ = make_param(this->site(), "conv2.weight", {out_, out_, kernel_, kernel_});
    b2_ = make_param(this->site(), "conv2.bias", {out_});
    if (projection_) {
      wp_ = make_param(this->site(), "shortcut.weight", {out_, in_, 1, 1});
      bp_ = make_param(this->site(), "shortcut.bias", {out_});
    }
  }
}

std::vector<Param*> ConvBlock::params() {
  std::vector<Param*> p{&w1_, &b1_};
  if (residual_) {
    p.push_back(&w2_);
    p.push_back(&b2_);
    if (projection_) {
      p.push_back(&wp_);
      p.push_back(&bp_);
    }
  }
  return p;
}

void ConvBlock::initialize(Rng& rng) {
  fill_normal(w1_.value, rng, std::sqrt(2.0f / static_cast<float>(in_ * kernel_ * kernel_)));
  if (residual_) {
    fill_normal(w2_.value, rng, 0.5f * std::sqrt(2.0f / static_cast<float>(out_ * kernel_ * kernel_)));
    if (projection_) fill_normal(wp_.value, rng, std::sqrt(1.0f / static_cast<float>(in_)));
  }
}

Tensor ConvBlock::forward(const Tensor& x, PassContext& ctx) const {
  expect_rank(x, 4, site());
  if (x.dim(1) != in_) throw UsageError(site() + ": channel mismatch " + shape_str(x.shape()));
  const ConvGeometry g1 = geometry_for(x, out_, kernel_, stride_);
  Tensor z1 = conv_forward(x, w1_, b1_, g1);
  if (!residual_) {
    Tensor y = relu(z1);
    ctx.save({x, std::move(z1)});
    return y;
  }
  Tensor a1 = relu(z1);
  Tensor z = conv_forward(a1, w2_, b2_, geometry_for(a1, out_, kernel_, 1));
  if (projection_) {
    const Tensor s = conv_forward(x, wp_, bp_, geometry_for(x, out_, 1, stride_));
    simd::active().add(z.data(), s.data(), z.data(), z.size());
  } else {
    simd::active().add(z.data(), x.data(), z.data(), z.size());
  }
  Tensor y = relu(z);
  ctx.save({x, std::move(z1), std::move(a1), std::move(z)});
  return y;
}

Tensor ConvBlock::backward(const Tensor& grad_out, PassContext& ctx) const {
  std::vector<Tensor> saved = ctx.restore();
  const Tensor& x = saved[0];
  Tensor gx = Tensor::zeros_like(x);
  const ConvGeometry g1 = geometry_for(x, out_, kernel_, stride_);
  if (!residual_) {
    const Tensor gz = relu_grad(saved[1], grad_out);
    conv_backward(x, gz, w1_, b1_, g1, &gx, ctx);
    return gx;
  }
  const Tensor& z1 = saved[1];
  const Tensor& a1 = saved[2];
  const Tensor gz = relu_grad(saved[3], grad_out);
  Tensor ga1 = Tensor::zeros_like(a1);
  conv_backward(a1, gz, w2_, b2_, geometry_for(a1, out_, kernel_, 1), &ga1, ctx);
  const Tensor gz1 = relu_grad(z1, ga1);
  conv_backward(x, gz1, w1_, b1_, g1, &gx, ctx);
  if (projection_) {
    conv_backward(x, gz, wp_, bp_, geometry_for(x, out_, 1, stride_), &gx, ctx);
  } else {
    simd::active().add(gx.data(), gz.data(), gx.data(), gx.size());
  }
  return gx;
}

// --- GlobalAvgPool -------------------------------------------------------------

Tensor GlobalAvgPool::forward(const Tensor& x, PassContext& ctx) const {
  expect_rank(x, 4, site());
  const std::size_t batch = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y({batch, channels});
  for (std::size_t i = 0; i < batch * channels; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += x[i * hw + j];
    y[i] = static_cast<float>(s / static_cast<double>(hw));
  }
  ctx.save({Tensor(x.shape())});
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out, PassContext& ctx) const {
  Tensor gx = std::move(ctx.restore()[0]);
  const std::size_t hw = gx.dim(2) * gx.dim(3);
  const float inv = 1.0f / static_cast<float>(hw);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const float v = grad_out[i] * inv;
    for (std::size_t j = 0; j < hw; ++j) gx[i * hw + j] = v;
  }
  return gx;
}

// --- Dense ---------------------------------------------------------------------

Dense::Dense(std::string site, std::size_t in, std::size_t out) : Layer(std::move(site)), in_(in), out_(out) {
  w_ = make_param(this->site(), "weight", {out_, in_});
  b_ = make_param(this->site(), "bias", {out_});
}

void Dense::initialize(Rng& rng) { fill_normal(w_.value, rng, std::sqrt(1.0f / static_cast<float>(in_))); }

Tensor Dense::forward(const Tensor& x, PassContext& ctx) const {
  expect_rank(x, 2, site());
  if (x.dim(1) != in_) throw UsageError(site() + ": feature mismatch " + shape_str(x.shape()));
  Tensor y({x.dim(0), out_});
  ops::linear_forward(x.data(), w_, b_, y.data(), x.dim(0), in_, out_);
  ctx.save({x});
  return y;
}

Tensor Dense::backward(const Tensor& grad_out, PassContext& ctx) const {
  const Tensor x = std::move(ctx.restore()[0]);
  Tensor gx = Tensor::zeros_like(x);
  ops::linear_backward(x.data(), grad_out.data(), w_, b_, gx.data(), x.dim(0), in_, out_, ctx);
  return gx;
}

// --- PatchEmbed ----------------------------------------------------------------

PatchEmbed::PatchEmbed(std::string site, std::size_t in_channels, std::size_t dim, std::size_t patch,
                       std::size_t image)
    : Layer(std::move(site)), in_(in_channels), dim_(dim), patch_(patch), image_(image), grid_(image / patch) {
  if (patch == 0 || image % patch != 0) throw ConfigError("image size must be a multiple of the patch size", "patch");
  w_ = make_param(this->site(), "proj.weight", {dim_, in_, patch_, patch_});
  b_ = make_param(this->site(), "proj.bias", {dim_});
  cls_ = make_param(this->site(), "cls_token", {dim_});
  pos_ = make_param(this->site(), "pos_embed", {1 + grid_ * grid_, dim_});
}

void PatchEmbed::initialize(Rng& rng) {
  fill_normal(w_.value, rng, std::sqrt(1.0f / static_cast<float>(in_ * patch_ * patch_)));
  fill_normal(cls_.value, rng, 0.02f);
  fill_normal(pos_.value, rng, 0.2f);
}

Tensor PatchEmbed::forward(const Tensor& x, PassContext& ctx) const {
  expect_rank(x, 4, site());
  if (x.dim(1) != in_ || x.dim(2) != image_ || x.dim(3) != image_) {
    throw UsageError(site() + ": input shape " + shape_str(x.shape()));
  }
  const ConvGeometry g{in_, dim_, patch_, patch_, 0, image_, image_};
  const Tensor maps = conv_forward(x, w_, b_, g);  // [B, D, g, g]
  const std::size_t batch = x.dim(0), tokens = 1 + grid_ * grid_, cells = grid_ * grid_;
  Tensor y({batch, tokens, dim_});
  for (std::size_t n = 0; n < batch; ++n) {
    float* yn = y.item(n).data();
    for (std::size_t d = 0; d < dim_; ++d) yn[d] = cls_.value[d] + pos_.value[d];
    transpose(maps.item(n).data(), yn + dim_, dim_, cells);
    for (std::size_t t = 1; t < tokens; ++t)
      simd::active().add(yn + t * dim_, pos_.value.data() + t * dim_, yn + t * dim_, dim_);
  }
  ctx.save({x});
  return y;
}

Tensor PatchEmbed::backward(const Tensor& grad_out, PassContext& ctx) const {
  const Tensor x = std::move(ctx.restore()[0]);
  const std::size_t batch = x.dim(0), tokens = 1 + grid_ * grid_, cells = grid_ * grid_;
  Tensor gmaps({batch, dim_, grid_, grid_});
  for (std::size_t n = 0; n < batch; ++n) transpose(grad_out.item(n).data() + dim_, gmaps.item(n).data(), cells, dim_);
  if (ctx.wants_param_grads()) {
    Tensor& gcls = ctx.param_grad(cls_);
    Tensor& gpos = ctx.param_grad(pos_);
    for (std::size_t n = 0; n < batch; ++n) {
      const float* gn = grad_out.item(n).data();
      simd::active().add(gcls.data(), gn, gcls.data(), dim_);
      simd::active().add(gpos.data(), gn, gpos.data(), tokens * dim_);
    }
  }
  Tensor gx = Tensor::zeros_like(x);
  conv_backward(x, gmaps, w_, b_, ConvGeometry{in_, dim_, patch_, patch_, 0, image_, image_}, &gx, ctx);
  return gx;
}

// --- TransformerBlock ----------------------------------------------------------

TransformerBlock::TransformerBlock(std::string site, std::size_t dim, std::size_t heads, std::size_t mlp_hidden)
    : Layer(std::move(site)), dim_(dim), heads_(heads), hidden_(mlp_hidden), norm1_site_(this->site() + ".norm1") {
  if (heads == 0 || dim % heads != 0) throw ConfigError("embedding dim must be divisible by heads", "heads");
  const std::string& s = this->site();
  ln1_g_ = make_param(s, "norm1.weight", {dim_}, 1.0f);
  ln1_b_ = make_param(s, "norm1.bias", {dim_});
  qkv_w_ = make_param(s, "attn.qkv.weight", {3 * dim_, dim_});
  qkv_b_ = make_param(s, "attn.qkv.bias", {3 * dim_});
  proj_w_ = make_param(s, "attn.proj.weight", {dim_, dim_});
  proj_b_ = make_param(s, "attn.proj.bias", {dim_});
  ln2_g_ = make_param(s, "norm2.weight", {dim_}, 1.0f);
  ln2_b_ = make_param(s, "norm2.bias", {dim_});
  fc1_w_ = make_param(s, "mlp.fc1.weight", {hidden_, dim_});
  fc1_b_ = make_param(s, "mlp.fc1.bias", {hidden_});
  fc2_w_ = make_param(s, "mlp.fc2.weight", {dim_, hidden_});
  fc2_b_ = make_param(s, "mlp.fc2.bias", {dim_});
}

std::vector<Param*> TransformerBlock::params() {
  return {&ln1_g_, &ln1_b_, &qkv_w_, &qkv_b_, &proj_w_, &proj_b_,
          &ln2_g_, &ln2_b_, &fc1_w_, &fc1_b_, &fc2_w_, &fc2_b_};
}

void TransformerBlock::initialize(Rng& rng) {
  const float s = std::sqrt(1.0f / static_cast<float>(dim_));
  fill_normal(qkv_w_.value, rng, s);
  fill_normal(proj_w_.value, rng, 0.5f * s);
  fill_normal(fc1_w_.value, rng, s);
  fill_normal(fc2_w_.value, rng, 0.5f * std::sqrt(1.0f / static_cast<float>(hidden_)));
}

Tensor TransformerBlock::forward(const Tensor& x, PassContext& ctx) const {
  expect_rank(x, 3, site());
  if (x.dim(2) != dim_) throw UsageError(site() + ": embedding mismatch " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0), tokens = x.dim(1), rows = batch * tokens, dh = dim_ / heads_;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  Tensor h1(x.shape()), xhat1(x.shape()), rstd1({rows});
  ops::layernorm_forward(x.data(), ln1_g_, ln1_b_, h1.data(), xhat1.data(), rstd1.data(), rows, dim_);
  ctx.forward_site(norm1_site_, h1);

  Tensor qkv({batch, tokens, 3 * dim_});
  ops::linear_forward(h1.data(), qkv_w_, qkv_b_, qkv.data(), rows, dim_, 3 * dim_);

  Tensor probs({batch, heads_, tokens, tokens});
  Tensor attn_out({batch, tokens, dim_});
  std::vector<float> q(tokens * dh), k(tokens * dh), v(tokens * dh), o(tokens * dh);
  for (std::size_t n = 0; n < batch; ++n) {
    const float* qn = qkv.item(n).data();
    for (std::size_t h = 0; h < heads_; ++h) {
      for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t d = 0; d < dh; ++d) {
          q[t * dh + d] = qn[t * 3 * dim_ + h * dh + d];
          k[t * dh + d] = qn[t * 3 * dim_ + dim_ + h * dh + d];
          v[t * dh + d] = qn[t * 3 * dim_ + 2 * dim_ + h * dh + d];
        }
      }
      float* p = probs.data() + (n * heads_ + h) * tokens * tokens;
      matmul(q.data(), false, k.data(), true, p, tokens, tokens, dh);
      for (std::size_t t = 0; t < tokens; ++t) {
        float* row = p + t * tokens;
        float mx = row[0] * scale;
        for (std::size_t j = 0; j < tokens; ++j) mx = std::max(mx, row[j] * scale);
        double z = 0.0;
        for (std::size_t j = 0; j < tokens; ++j) {
          row[j] = std::exp(row[j] * scale - mx);
          z += row[j];
        }
        const float inv = static_cast<float>(1.0 / z);
        for (std::size_t j = 0; j < tokens; ++j) row[j] *= inv;
      }
      matmul(p, false, v.data(), false, o.data(), tokens, dh, tokens);
      float* on = attn_out.item(n).data();
      for (std::size_t t = 0; t < tokens; ++t)
        for (std::size_t d = 0; d < dh; ++d) on[t * dim_ + h * dh + d] = o[t * dh + d];
    }
  }

  Tensor x1(x.shape());
  ops::linear_forward(attn_out.data(), proj_w_, proj_b_, x1.data(), rows, dim_, dim_);
  simd::active().add(x1.data(), x.data(), x1.data(), x1.size());

  Tensor h2(x.shape()), xhat2(x.shape()), rstd2({rows});
  ops::layernorm_forward(x1.data(), ln2_g_, ln2_b_, h2.data(), xhat2.data(), rstd2.data(), rows, dim_);
  Tensor pre({rows, hidden_});
  ops::linear_forward(h2.data(), fc1_w_, fc1_b_, pre.data(), rows, dim_, hidden_);
  Tensor act({rows, hidden_});
  for (std::size_t i = 0; i < pre.size(); ++i) act[i] = ops::gelu(pre[i]);
  Tensor y(x.shape());
  ops::linear_forward(act.data(), fc2_w_, fc2_b_, y.data(), rows, hidden_, dim_);
  simd::active().add(y.data(), x1.data(), y.data(), y.size());

  ctx.save({std::move(xhat1), std::move(rstd1), std::move(h1), std::move(qkv), std::move(probs),
            std::move(attn_out), std::move(xhat2), std::move(rstd2), std::move(h2), std::move(pre),
            std::move(act)});
  return y;
}

Tensor TransformerBlock::backward(const Tensor& grad_out, PassContext& ctx) const {
  std::vector<Tensor> s = ctx.restore();
  const Tensor &xhat1 = s[0], &rstd1 = s[1], &h1 = s[2], &qkv = s[3], &probs = s[4], &attn_out = s[5],
               &xhat2 = s[6], &rstd2 = s[7], &h2 = s[8], &pre = s[9], &act = s[10];
  const std::size_t batch = grad_out.dim(0), tokens = grad_out.dim(1), rows = batch * tokens, dh = dim_ / heads_;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  // MLP branch; grad_out also flows straight into x1.
  Tensor gact({rows, hidden_});
  ops::linear_backward(act.data(), grad_out.data(), fc2_w_, fc2_b_, gact.data(), rows, hidden_, dim_, ctx);
  for (std::size_t i = 0; i < gact.size(); ++i) gact[i] *= ops::gelu_grad(pre[i]);
  Tensor gh2(grad_out.shape());
  ops::linear_backward(h2.data(), gact.data(), fc1_w_, fc1_b_, gh2.data(), rows, dim_, hidden_, ctx);
  Tensor gx1(grad_out.shape());
  ops::layernorm_backward(gh2.data(), xhat2.data(), rstd2.data(), ln2_g_, ln2_b_, gx1.data(), rows, dim_, ctx);
  simd::active().add(gx1.data(), grad_out.data(), gx1.data(), gx1.size());

  // Attention branch.
  Tensor gattn(grad_out.shape());
  ops::linear_backward(attn_out.data(), gx1.data(), proj_w_, proj_b_, gattn.data(), rows, dim_, dim_, ctx);
  Tensor gqkv({batch, tokens, 3 * dim_});
  std::vector<float> q(tokens * dh), k(tokens * dh), v(tokens * dh), go(tokens * dh);
  std::vector<float> gp(tokens * tokens), gq(tokens * dh), gk(tokens * dh), gv(tokens * dh);
  for (std::size_t n = 0; n < batch; ++n) {
    const float* qn = qkv.item(n).data();
    const float* gn = gattn.item(n).data();
    float* gqn = gqkv.item(n).data();
    for (std::size_t h = 0; h < heads_; ++h) {
      for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t d = 0; d < dh; ++d) {
          q[t * dh + d] = qn[t * 3 * dim_ + h * dh + d];
          k[t * dh + d] = qn[t * 3 * dim_ + dim_ + h * dh + d];
          v[t * dh + d] = qn[t * 3 * dim_ + 2 * dim_ + h * dh + d];
          go[t * dh + d] = gn[t * dim_ + h * dh + d];
        }
      }
      const float* p = probs.data() + (n * heads_ + h) * tokens * tokens;
      matmul(p, true, go.data(), false, gv.data(), tokens, dh, tokens);
      matmul(go.data(), false, v.data(), true, gp.data(), tokens, tokens, dh);
      for (std::size_t t = 0; t < tokens; ++t) {
        double dotp = 0.0;
        for (std::size_t j = 0; j < tokens; ++j) dotp += static_cast<double>(gp[t * tokens + j]) * p[t * tokens + j];
        for (std::size_t j = 0; j < tokens; ++j) {
          gp[t * tokens + j] = p[t * tokens + j] * (gp[t * tokens + j] - static_cast<float>(dotp)) * scale;
        }
      }
      matmul(gp.data(), false, k.data(), false, gq.data(), tokens, dh, tokens);
      matmul(gp.data(), true, q.data(), false, gk.data(), tokens, dh, tokens);
      for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t d = 0; d < dh; ++d) {
          gqn[t * 3 * dim_ + h * dh + d] = gq[t * dh + d];
          gqn[t * 3 * dim_ + dim_ + h * dh + d] = gk[t * dh + d];
          gqn[t * 3 * dim_ + 2 * dim_ + h * dh + d] = gv[t * dh + d];
        }
      }
    }
  }
  Tensor gh1(grad_out.shape());
  ops::linear_backward(h1.data(), gqkv.data(), qkv_w_, qkv_b_, gh1.data(), rows, dim_, 3 * dim_, ctx);
  ctx.backward_site(norm1_site_, gh1);

  Tensor gx(grad_out.shape());
  ops::layernorm_backward(gh1.data(), xhat1.data(), rstd1.data(), ln1_g_, ln1_b_, gx.data(), rows, dim_, ctx);
  simd::active().add(gx.data(), gx1.data(), gx.data(), gx.size());
  return gx;
}

// --- TokenHead -------------------------------------------------------------------

TokenHead::TokenHead(std::string site, std::size_t dim, std::size_t classes, bool mean_pool)
    : Layer(std::move(site)), dim_(dim), classes_(classes), mean_pool_(mean_pool) {
  ln_g_ = make_param(this->site(), "norm.weight", {dim_}, 1.0f);
  ln_b_ = make_param(this->site(), "norm.bias", {dim_});
  w_ = make_param(this->site(), "fc.weight", {classes_, dim_});
  b_ = make_param(this->site(), "fc.bias", {classes_});
}

void TokenHead::initialize(Rng& rng) { fill_normal(w_.value, rng, std::sqrt(1.0f / static_cast<float>(dim_))); }

Tensor TokenHead::forward(const Tensor& x, PassContext& ctx) const {
  expect_rank(x, 3, site());
  const std::size_t batch = x.dim(0), tokens = x.dim(1);
  Tensor cls({batch, dim_});
  for (std::size_t n = 0; n < batch; ++n) {
    if (!mean_pool_) {
      std::copy_n(x.item(n).data(), dim_, cls.item(n).data());
      continue;
    }
    float* dst = cls.item(n).data();
    for (std::size_t t = 0; t < tokens; ++t) simd::active().add(dst, x.item(n).data() + t * dim_, dst, dim_);
    simd::active().scale(1.0f / static_cast<float>(tokens), dst, dim_);
  }
  Tensor h(cls.shape()), xhat(cls.shape()), rstd({batch});
  ops::layernorm_forward(cls.data(), ln_g_, ln_b_, h.data(), xhat.data(), rstd.data(), batch, dim_);
  Tensor y({batch, classes_});
  ops::linear_forward(h.data(), w_, b_, y.data(), batch, dim_, classes_);
  ctx.save({std::move(xhat), std::move(rstd), std::move(h), Tensor({batch, tokens, dim_})});
  return y;
}

Tensor TokenHead::backward(const Tensor& grad_out, PassContext& ctx) const {
  std::vector<Tensor> s = ctx.restore();
  const std::size_t batch = grad_out.dim(0);
  Tensor gh({batch, dim_});
  ops::linear_backward(s[2].data(), grad_out.data(), w_, b_, gh.data(), batch, dim_, classes_, ctx);
  Tensor gcls({batch, dim_});
  ops::layernorm_backward(gh.data(), s[0].data(), s[1].data(), ln_g_, ln_b_, gcls.data(), batch, dim_, ctx);
  Tensor gx = std::move(s[3]);
  const std::size_t tokens = gx.dim(1);
  for (std::size_t n = 0; n < batch; ++n) {
    if (!mean_pool_) {
      std::copy_n(gcls.item(n).data(), dim_, gx.item(n).data());
      continue;
    }
    simd::active().scale(1.0f / static_cast<float>(tokens), gcls.item(n).data(), dim_);
    for (std::size_t t = 0; t < tokens; ++t) std::copy_n(gcls.item(n).data(), dim_, gx.item(n).data() + t * dim_);
  }
  return gx;
}

}  // namespace namea::nn
