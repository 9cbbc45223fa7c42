#include "namea/model/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "namea/errors.hpp"
#include "namea/nn/linalg.hpp"
#include "namea/simd/kernels.hpp"

namespace namea::model {

ModelHandle::ModelHandle(std::string id, nn::Network net, std::string tap_layer)
    : id_(std::move(id)), net_(std::move(net)), tap_(std::move(tap_layer)) {
  if (tap_.empty()) tap_ = net_.default_tap_site();
  if (!net_.has_site(tap_)) throw ConfigError("model '" + id_ + "' has no layer '" + tap_ + "'", "tap_layer");
  channels_ = net_.tap_channels();
}

namespace {

void check_batch(const ModelHandle& model, const Tensor& batch) {
  const Shape want = model.input_shape();
  if (batch.rank() != 4 || !std::equal(want.begin(), want.end(), batch.shape().begin() + 1)) {
    throw ConfigError("model '" + model.id() + "' expects inputs " + shape_str(want) + ", got " + shape_str(batch.shape()),
                      "input_shape");
  }
}

void check_labels(const ModelHandle& model, const Tensor& batch, std::span<const int> labels) {
  if (labels.size() != batch.dim(0)) throw UsageError("label count does not match batch size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes()) {
      throw UsageError("label " + std::to_string(y) + " out of range for model '" + model.id() + "'");
    }
  }
}

}  // namespace

GradientPass::GradientPass(const ModelHandle& model, const Tensor& batch, std::string capture_site)
    : model_(&model) {
  check_batch(model, batch);
  if (!capture_site.empty()) ctx_.capture(std::move(capture_site));
  if (model.gso_attached()) ctx_.set_backward_hook(make_gso_hook(model, *model.gso()));
  logits_ = model.network().forward(batch, ctx_);
  if (!logits_.all_finite()) throw ModelFault(model.id(), "non-finite logits");
}

Tensor GradientPass::backward(const Tensor& grad_logits, std::string_view context) {
  if (done_) throw UsageError("GradientPass::backward called twice");
  done_ = true;
  Tensor g = model_->network().backward(grad_logits, ctx_);
  if (!g.all_finite()) {
    std::string what = "non-finite input gradient";
    if (!context.empty()) what += " (" + std::string(context) + ")";
    throw ModelFault(model_->id(), what);
  }
  return g;
}

Tensor forward_logits(const ModelHandle& model, const Tensor& batch) {
  check_batch(model, batch);
  nn::PassContext ctx;
  Tensor logits = model.network().forward(batch, ctx);
  if (!logits.all_finite()) throw ModelFault(model.id(), "non-finite logits");
  return logits;
}

std::vector<double> cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* z = logits.data() + i * k;
    const double mx = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - mx);
    out[i] = mx + std::log(s) - z[labels[i]];
  }
  return out;
}

Tensor cross_entropy_grad(const Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor g(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const float* z = logits.data() + i * k;
    const double mx = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - mx);
    for (std::size_t j = 0; j < k; ++j) g[i * k + j] = static_cast<float>(std::exp(z[j] - mx) / s);
    g[i * k + static_cast<std::size_t>(labels[i])] -= 1.0f;
  }
  return g;
}

Tensor input_gradient(const ModelHandle& model, const Tensor& batch, std::span<const int> labels, float loss_scale,
                      std::string_view context) {
  check_labels(model, batch, labels);
  GradientPass pass(model, batch);
  Tensor dlogits = cross_entropy_grad(pass.logits(), labels);
  if (loss_scale != 1.0f) simd::active().scale(loss_scale, dlogits.data(), dlogits.size());
  return pass.backward(dlogits, context);
}

FeatureBundle feature_and_grad(const ModelHandle& model, const Tensor& batch, std::span<const int> labels) {
  check_labels(model, batch, labels);
  if (!model.network().has_site(model.tap_layer())) {
    throw ConfigError("tap layer '" + model.tap_layer() + "' not found", "tap_layer");
  }
  nn::PassContext ctx;
  ctx.capture(model.tap_layer());
  const Tensor logits = model.network().forward(batch, ctx);
  if (!logits.all_finite()) throw ModelFault(model.id(), "non-finite logits");
  Tensor onehot(logits.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) onehot[i * logits.dim(1) + static_cast<std::size_t>(labels[i])] = 1.0f;
  model.network().backward(onehot, ctx);
  if (!ctx.has_capture() || ctx.captured_grad().empty()) {
    throw ConfigError("tap layer '" + model.tap_layer() + "' produced no activations", "tap_layer");
  }

  FeatureBundle out;
  const Tensor& value = ctx.captured_value();
  const Tensor& grad = ctx.captured_grad();
  if (value.rank() == 4) {
    out.features = value;
    out.feature_grads = grad;
    out.height = value.dim(2);
    out.width = value.dim(3);
  } else if (value.rank() == 3) {
    // Tokens [N, 1 + g*g, D]: drop the class token, lay patches on the grid.
    const std::size_t n = value.dim(0), tokens = value.dim(1), d = value.dim(2);
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(tokens - 1))));
    if (side * side + 1 != tokens) throw ConfigError("token count is not 1 + a square grid", "tap_layer");
    out.features = Tensor({n, d, side, side});
    out.feature_grads = Tensor({n, d, side, side});
    for (std::size_t i = 0; i < n; ++i) {
      nn::transpose(value.item(i).data() + d, out.features.item(i).data(), side * side, d);
      nn::transpose(grad.item(i).data() + d, out.feature_grads.item(i).data(), side * side, d);
    }
    out.height = out.width = side;
  } else {
    throw ConfigError("tap layer '" + model.tap_layer() + "' is not spatial", "tap_layer");
  }
  return out;
}

// --- GSO hooks ------------------------------------------------------------------

nn::BackwardHook make_gso_hook(const ModelHandle& model, const core::GsoConfig& config) {
  if (model.family() == Family::CNN) {
    const std::size_t count = model.layer_count();
    const auto& sites = model.network().block_sites();
    std::map<std::string, float, std::less<>> factors;
    for (std::size_t l : core::cnn_scaled_layers(count)) {
      factors.emplace(sites[l - 1], static_cast<float>(core::cnn_layer_factor(l, count, config.lambda1, config.lambda2)));
    }
    return [factors = std::move(factors)](std::string_view site, Tensor& grad) {
      if (auto it = factors.find(site); it != factors.end()) simd::active().scale(it->second, grad.data(), grad.size());
    };
  }
  return [site = model.tap_layer()](std::string_view at, Tensor& grad) {
    if (at != site) return;
    if (grad.rank() != 3) throw UsageError("channel-wise scaling expects token gradients at " + site);
    for (std::size_t n = 0; n < grad.dim(0); ++n) core::gso_scale_vit(grad.item(n), grad.dim(1), grad.dim(2));
  };
}

GsoAttachment::GsoAttachment(ModelHandle& model, const core::GsoConfig& config) {
  config.validate();
  if (model.gso_attached()) throw UsageError("GSO already attached to model '" + model.id() + "'");
  if (model.family() == Family::CNN) core::cnn_scaled_layers(model.layer_count());
  model.gso_ = config;
  model_ = &model;
}

GsoAttachment::GsoAttachment(GsoAttachment&& other) noexcept : model_(other.model_) { other.model_ = nullptr; }

GsoAttachment& GsoAttachment::operator=(GsoAttachment&& other) noexcept {
  if (this != &other) {
    detach();
    model_ = other.model_;
    other.model_ = nullptr;
  }
  return *this;
}

GsoAttachment::~GsoAttachment() { detach(); }

void GsoAttachment::detach() noexcept {
  if (model_ != nullptr) {
    model_->gso_.reset();
    model_ = nullptr;
  }
}

GsoAttachment attach_gso(ModelHandle& model, const core::GsoConfig& config) { return GsoAttachment(model, config); }

// --- registry -------------------------------------------------------------------

std::vector<RegistryEntry> load_registry(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open model registry " + path.string(), "registry");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed registry: ") + e.what(), "registry");
  }
  std::vector<RegistryEntry> out;
  try {
    for (const auto& m : j.at("models")) {
      RegistryEntry e;
      e.id = m.at("id").get<std::string>();
      e.weights = m.at("weights").get<std::string>();
      if (e.weights.is_relative()) e.weights = path.parent_path() / e.weights;
      e.family = nn::family_from_string(m.at("family").get<std::string>());
      e.tap_layer = m.value("tap_layer", "");
      e.layer_count = m.value("layer_count", std::size_t{0});
      e.channels = m.value("channels", std::size_t{0});
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed registry entry: ") + e.what(), "registry");
  }
  return out;
}

void save_registry(const std::filesystem::path& path, std::span<const RegistryEntry> entries) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& e : entries) {
    std::filesystem::path w = e.weights;
    if (w.parent_path() == path.parent_path()) w = w.filename();
    models.push_back({{"id", e.id},
                      {"weights", w.string()},
                      {"family", std::string(nn::to_string(e.family))},
                      {"tap_layer", e.tap_layer},
                      {"layer_count", e.layer_count},
                      {"channels", e.channels}});
  }
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write registry " + path.string(), "registry");
  os << nlohmann::json{{"models", models}}.dump(2) << "\n";
}

ModelHandle load_model(const RegistryEntry& entry) {
  nn::Network net = nn::load_checkpoint(entry.weights);
  if (net.family() != entry.family) throw ConfigError("model '" + entry.id + "': family differs from checkpoint", "family");
  if (entry.layer_count != 0 && entry.layer_count != net.layer_count()) {
    throw ConfigError("model '" + entry.id + "': declared L=" + std::to_string(entry.layer_count) + ", checkpoint has " +
                          std::to_string(net.layer_count()),
                      "layer_count");
  }
  ModelHandle handle(entry.id, std::move(net), entry.tap_layer);
  if (entry.channels != 0 && entry.channels != handle.channel_count()) {
    throw ConfigError("model '" + entry.id + "': declared C=" + std::to_string(entry.channels) + " differs", "channels");
  }
  return handle;
}

std::vector<ModelHandle> load_models(std::span<const RegistryEntry> registry, std::span<const std::string> ids) {
  std::vector<ModelHandle> out;
  for (const auto& id : ids) {
    auto it = std::find_if(registry.begin(), registry.end(), [&](const RegistryEntry& e) { return e.id == id; });
    if (it == registry.end()) throw ConfigError("model '" + id + "' not in registry", "models");
    out.push_back(load_model(*it));
  }
  return out;
}

}  // namespace namea::model
