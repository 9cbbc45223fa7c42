#include "namea/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "namea/rng.hpp"

namespace namea::nn {
namespace {

int argmax(const float* z, std::size_t k) { return static_cast<int>(std::max_element(z, z + k) - z); }

/// Shift by up to 2 pixels with edge replication, one draw per image.
void augment_image(std::span<float> img, std::size_t c, std::size_t s, Rng& rng, std::vector<float>& scratch) {
  const auto dy = rng.uniform_int(-2, 2), dx = rng.uniform_int(-2, 2);
  scratch.assign(img.begin(), img.end());
  const auto si = static_cast<std::int64_t>(s);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::int64_t y = 0; y < si; ++y)
      for (std::int64_t x = 0; x < si; ++x) {
        const std::int64_t sy = std::clamp<std::int64_t>(y + dy, 0, si - 1);
        const std::int64_t sx = std::clamp<std::int64_t>(x + dx, 0, si - 1);
        img[(ch * s + static_cast<std::size_t>(y)) * s + static_cast<std::size_t>(x)] =
            scratch[(ch * s + static_cast<std::size_t>(sy)) * s + static_cast<std::size_t>(sx)];
      }
}

}  // namespace

void train_classifier(Network& net, const ImageBatch& data, const TrainOptions& opt,
                      const std::function<void(const EpochStats&)>& on_epoch) {
  const std::size_t n = data.size(), k = net.num_classes();
  Rng rng = Rng::substream(opt.seed, "train");
  std::vector<Param*> params = net.params();
  std::unordered_map<const Param*, std::pair<Tensor, Tensor>> moments;
  for (Param* p : params) moments.emplace(p, std::make_pair(Tensor::zeros_like(p->value), Tensor::zeros_like(p->value)));
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const std::size_t steps_per_epoch = (n + opt.batch_size - 1) / opt.batch_size;
  const std::size_t total_steps = steps_per_epoch * opt.epochs;
  std::size_t step = 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<float> scratch;

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < n; begin += opt.batch_size) {
      const std::size_t m = std::min(opt.batch_size, n - begin);
      Shape shape = data.images.shape();
      shape[0] = m;
      Tensor x(shape);
      std::vector<int> y(m);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t src = order[begin + i];
        std::copy(data.images.item(src).begin(), data.images.item(src).end(), x.item(i).begin());
        y[i] = data.labels[src];
        if (opt.augment) augment_image(x.item(i), shape[1], shape[2], rng, scratch);
      }

      PassContext ctx(true);
      const Tensor logits = net.forward(x, ctx);
      Tensor g(logits.shape());
      for (std::size_t i = 0; i < m; ++i) {
        const float* z = logits.data() + i * k;
        const double mx = *std::max_element(z, z + k);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - mx);
        for (std::size_t j = 0; j < k; ++j) {
          const double p = std::exp(z[j] - mx) / s;
          g[i * k + j] = static_cast<float>((p - (static_cast<int>(j) == y[i] ? 1.0 : 0.0)) / static_cast<double>(m));
        }
        loss_sum += -(z[y[i]] - mx - std::log(s));
        correct += argmax(z, k) == y[i] ? 1 : 0;
      }
      net.backward(g, ctx);

      ++step;
      const double warm = std::max(1.0, opt.warmup * static_cast<double>(total_steps));
      const double lr = opt.learning_rate * std::min(1.0, static_cast<double>(step) / warm) * 0.5 *
                        (1.0 + std::cos(std::numbers::pi * static_cast<double>(step - 1) / static_cast<double>(total_steps)));
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step)), c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      for (Param* p : params) {
        auto it = ctx.param_grads().find(p);
        if (it == ctx.param_grads().end()) continue;
        const Tensor& grad = it->second;
        auto& [mt, vt] = moments.at(p);
        for (std::size_t i = 0; i < grad.size(); ++i) {
          mt[i] = static_cast<float>(b1 * mt[i] + (1 - b1) * grad[i]);
          vt[i] = static_cast<float>(b2 * vt[i] + (1 - b2) * grad[i] * grad[i]);
          const double update = (mt[i] / c1) / (std::sqrt(vt[i] / c2) + eps);
          p->value[i] = static_cast<float>(p->value[i] * (1.0 - lr * opt.weight_decay) - lr * update);
        }
      }
    }
    if (on_epoch) {
      on_epoch({epoch + 1, loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)});
    }
  }
}

double accuracy(const Network& net, const ImageBatch& data, std::size_t batch_size) {
  std::size_t correct = 0;
  const std::size_t k = net.num_classes();
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t m = std::min(batch_size, data.size() - begin);
    PassContext ctx;
    const Tensor logits = net.forward(data.images.slice(begin, m), ctx);
    for (std::size_t i = 0; i < m; ++i) correct += argmax(logits.data() + i * k, k) == data.labels[begin + i] ? 1 : 0;
  }
  return data.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace namea::nn
