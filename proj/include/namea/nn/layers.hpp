#pragma once

#include <memory>
#include <string>
#include <vector>

#include "namea/nn/context.hpp"
#include "namea/rng.hpp"
#include "namea/tensor.hpp"

namespace namea::nn {

/// A top-level stage of a network. Each layer is also a hook site named
/// after it; composite layers may expose further inner sites.
class Layer {
 public:
  explicit Layer(std::string site) : site_(std::move(site)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& site() const noexcept { return site_; }
  virtual std::vector<std::string> inner_sites() const { return {}; }

  virtual Tensor forward(const Tensor& x, PassContext& ctx) const = 0;
  virtual Tensor backward(const Tensor& grad_out, PassContext& ctx) const = 0;

  virtual std::vector<Param*> params() { return {}; }
  virtual void initialize(Rng& /*rng*/) {}

 private:
  std::string site_;
};

/// 3x3 conv + ReLU, or a two-conv residual unit with a 1x1 projection
/// shortcut when the shape changes.
class ConvBlock final : public Layer {
 public:
  ConvBlock(std::string site, std::size_t in_channels, std::size_t out_channels, std::size_t stride,
            bool residual, std::size_t kernel = 3);

  Tensor forward(const Tensor& x, PassContext& ctx) const override;
  Tensor backward(const Tensor& grad_out, PassContext& ctx) const override;
  std::vector<Param*> params() override;
  void initialize(Rng& rng) override;

  std::size_t out_channels() const noexcept { return out_; }

 private:
  std::size_t in_, out_, stride_, kernel_;
  bool residual_;
  bool projection_;
  Param w1_, b1_, w2_, b2_, wp_, bp_;
};

class GlobalAvgPool final : public Layer {
 public:
  using Layer::Layer;
  Tensor forward(const Tensor& x, PassContext& ctx) const override;
  Tensor backward(const Tensor& grad_out, PassContext& ctx) const override;
};

/// Affine map on [B, in].
class Dense final : public Layer {
 public:
  Dense(std::string site, std::size_t in, std::size_t out);
  Tensor forward(const Tensor& x, PassContext& ctx) const override;
  Tensor backward(const Tensor& grad_out, PassContext& ctx) const override;
  std::vector<Param*> params() override { return {&w_, &b_}; }
  void initialize(Rng& rng) override;

 private:
  std::size_t in_, out_;
  Param w_, b_;
};

/// Non-overlapping patch projection plus class token and learned positions:
/// [B,C,H,W] -> [B, 1 + (H/p)*(W/p), D].
class PatchEmbed final : public Layer {
 public:
  PatchEmbed(std::string site, std::size_t in_channels, std::size_t dim, std::size_t patch, std::size_t image);
  Tensor forward(const Tensor& x, PassContext& ctx) const override;
  Tensor backward(const Tensor& grad_out, PassContext& ctx) const override;
  std::vector<Param*> params() override { return {&w_, &b_, &cls_, &pos_}; }
  void initialize(Rng& rng) override;

 private:
  std::size_t in_, dim_, patch_, image_, grid_;
  Param w_, b_, cls_, pos_;
};

/// Pre-norm encoder block: x + MHSA(LN1(x)), then + MLP(LN2(.)).
/// The LN1 output is exposed as the inner site "<site>.norm1".
class TransformerBlock final : public Layer {
 public:
  TransformerBlock(std::string site, std::size_t dim, std::size_t heads, std::size_t mlp_hidden);
  std::vector<std::string> inner_sites() const override { return {norm1_site_}; }
  Tensor forward(const Tensor& x, PassContext& ctx) const override;
  Tensor backward(const Tensor& grad_out, PassContext& ctx) const override;
  std::vector<Param*> params() override;
  void initialize(Rng& rng) override;

  const std::string& norm1_site() const noexcept { return norm1_site_; }

 private:
  std::size_t dim_, heads_, hidden_;
  std::string norm1_site_;
  Param ln1_g_, ln1_b_, qkv_w_, qkv_b_, proj_w_, proj_b_, ln2_g_, ln2_b_, fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

/// Final LayerNorm on the class token (or on the mean of all tokens when
/// `mean_pool` is set) followed by the classifier.
class TokenHead final : public Layer {
 public:
  TokenHead(std::string site, std::size_t dim, std::size_t classes, bool mean_pool = false);
  Tensor forward(const Tensor& x, PassContext& ctx) const override;
  Tensor backward(const Tensor& grad_out, PassContext& ctx) const override;
  std::vector<Param*> params() override { return {&ln_g_, &ln_b_, &w_, &b_}; }
  void initialize(Rng& rng) override;

 private:
  std::size_t dim_, classes_;
  bool mean_pool_;
  Param ln_g_, ln_b_, w_, b_;
};

// Row-wise building blocks shared by the layers above; exposed for tests.
namespace ops {

constexpr float kLayerNormEps = 1e-5f;

/// y[R,out] = x[R,in] W^T + b with W stored [out,in].
void linear_forward(const float* x, const Param& w, const Param& b, float* y, std::size_t rows,
                    std::size_t in, std::size_t out);
void linear_backward(const float* x, const float* gy, const Param& w, const Param& b, float* gx,
                     std::size_t rows, std::size_t in, std::size_t out, PassContext& ctx);

/// Saves normalised rows and reciprocal std for the backward pass.
void layernorm_forward(const float* x, const Param& g, const Param& b, float* y, float* xhat, float* rstd,
                       std::size_t rows, std::size_t dim);
void layernorm_backward(const float* gy, const float* xhat, const float* rstd, const Param& g, const Param& b,
                        float* gx, std::size_t rows, std::size_t dim, PassContext& ctx);

float gelu(float x);
float gelu_grad(float x);

}  // namespace ops

}  // namespace namea::nn
