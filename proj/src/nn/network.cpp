#include "namea/nn/network.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "namea/errors.hpp"

namespace namea::nn {

std::string_view to_string(Family f) { return f == Family::CNN ? "CNN" : "VIT"; }

Family family_from_string(std::string_view s) {
  if (s == "CNN" || s == "cnn") return Family::CNN;
  if (s == "VIT" || s == "vit" || s == "ViT") return Family::VIT;
  throw ConfigError("unknown model family '" + std::string(s) + "'", "family");
}

nlohmann::json ArchSpec::to_json() const {
  nlohmann::json j{{"name", name},
                   {"family", std::string(to_string(family))},
                   {"in_channels", in_channels},
                   {"image_size", image_size},
                   {"num_classes", num_classes}};
  if (family == Family::CNN) {
    auto arr = nlohmann::json::array();
    for (const auto& b : blocks) arr.push_back({{"channels", b.channels}, {"stride", b.stride}, {"residual", b.residual}});
    j["blocks"] = arr;
  } else {
    j["patch"] = patch;
    j["dim"] = dim;
    j["depth"] = depth;
    j["heads"] = heads;
    j["mlp_hidden"] = mlp_hidden;
    j["mean_pool"] = mean_pool;
    j["stem_channels"] = stem_channels;
  }
  return j;
}

ArchSpec ArchSpec::from_json(const nlohmann::json& j) {
  ArchSpec s;
  try {
    s.name = j.value("name", "");
    s.family = family_from_string(j.at("family").get<std::string>());
    s.in_channels = j.value("in_channels", std::size_t{3});
    s.image_size = j.value("image_size", std::size_t{32});
    s.num_classes = j.value("num_classes", std::size_t{10});
    if (s.family == Family::CNN) {
      for (const auto& b : j.at("blocks")) {
        s.blocks.push_back({b.at("channels").get<std::size_t>(), b.value("stride", std::size_t{1}),
                            b.value("residual", false)});
      }
    } else {
      s.patch = j.at("patch").get<std::size_t>();
      s.dim = j.at("dim").get<std::size_t>();
      s.depth = j.at("depth").get<std::size_t>();
      s.heads = j.at("heads").get<std::size_t>();
      s.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
      s.mean_pool = j.value("mean_pool", false);
      s.stem_channels = j.value("stem_channels", std::size_t{0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed architecture: ") + e.what(), "arch");
  }
  return s;
}

Network::Network(ArchSpec spec) : spec_(std::move(spec)) {
  if (spec_.family == Family::CNN) {
    if (spec_.blocks.empty()) throw ConfigError("CNN needs at least one block", "blocks");
    std::size_t channels = spec_.in_channels;
    for (std::size_t l = 0; l < spec_.blocks.size(); ++l) {
      const auto& b = spec_.blocks[l];
      auto block = std::make_unique<ConvBlock>("block" + std::to_string(l + 1), channels, b.channels, b.stride, b.residual);
      block_sites_.push_back(block->site());
      layers_.push_back(std::move(block));
      channels = b.channels;
    }
    layers_.push_back(std::make_unique<GlobalAvgPool>("pool"));
    layers_.push_back(std::make_unique<Dense>("fc", channels, spec_.num_classes));
  } else {
    if (spec_.depth == 0) throw ConfigError("ViT needs at least one block", "depth");
    std::size_t channels = spec_.in_channels;
    if (spec_.stem_channels > 0) {
      layers_.push_back(std::make_unique<ConvBlock>("stem", channels, spec_.stem_channels, 1, false));
      channels = spec_.stem_channels;
    }
    layers_.push_back(std::make_unique<PatchEmbed>("embed", channels, spec_.dim, spec_.patch, spec_.image_size));
    for (std::size_t l = 0; l < spec_.depth; ++l) {
      auto block = std::make_unique<TransformerBlock>("block" + std::to_string(l + 1), spec_.dim, spec_.heads, spec_.mlp_hidden);
      block_sites_.push_back(block->site());
      layers_.push_back(std::move(block));
    }
    layers_.push_back(std::make_unique<TokenHead>("head", spec_.dim, spec_.num_classes, spec_.mean_pool));
  }
  for (const auto& layer : layers_) {
    sites_.push_back(layer->site());
    for (auto& s : layer->inner_sites()) sites_.push_back(std::move(s));
  }
}

void Network::initialize(std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "init:" + spec_.name);
  for (auto& layer : layers_) layer->initialize(rng);
}

Network Network::clone() const {
  Network copy(spec_);
  auto dst = copy.params();
  auto src = params();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
  return copy;
}

std::string Network::default_tap_site() const {
  if (spec_.family == Family::CNN) return block_sites_.back();
  return block_sites_.back() + ".norm1";
}

bool Network::has_site(std::string_view site) const {
  return std::find(sites_.begin(), sites_.end(), site) != sites_.end();
}

std::size_t Network::tap_channels() const {
  return spec_.family == Family::CNN ? spec_.blocks.back().channels : spec_.dim;
}

Tensor Network::forward(const Tensor& x, PassContext& ctx) const {
  const Shape expected = input_shape();
  if (x.rank() != 4 || !std::equal(expected.begin(), expected.end(), x.shape().begin() + 1)) {
    throw UsageError("network '" + spec_.name + "': input " + shape_str(x.shape()) + " does not match " +
                     shape_str(expected));
  }
  Tensor h = x;
  for (const auto& layer : layers_) {
    h = layer->forward(h, ctx);
    ctx.forward_site(layer->site(), h);
  }
  return h;
}

Tensor Network::backward(const Tensor& grad_logits, PassContext& ctx) const {
  Tensor g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    ctx.backward_site((*it)->site(), g);
    g = (*it)->backward(g, ctx);
  }
  return g;
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& layer : layers_)
    for (Param* p : layer->params()) out.push_back(p);
  return out;
}

std::vector<const Param*> Network::params() const {
  std::vector<const Param*> out;
  for (const auto& layer : layers_)
    for (Param* p : layer->params()) out.push_back(p);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Param* p : params()) n += p->value.size();
  return n;
}

// Checkpoint layout (little-endian):
//   "NAMEAW01" | u64 json length | arch json | u64 param count |
//   per param: u64 name length | name | u64 rank | u64 dims[rank] | f32 values
namespace {

constexpr char kMagic[8] = {'N', 'A', 'M', 'E', 'A', 'W', '0', '1'};

void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw ConfigError("truncated checkpoint", "weights");
  return v;
}

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string(), "weights");
  os.write(kMagic, sizeof kMagic);
  const std::string arch = net.arch().to_json().dump();
  put_u64(os, arch.size());
  os.write(arch.data(), static_cast<std::streamsize>(arch.size()));
  const auto params = net.params();
  put_u64(os, params.size());
  for (const Param* p : params) {
    put_u64(os, p->name.size());
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u64(os, p->value.rank());
    for (std::size_t d : p->value.shape()) put_u64(os, d);
    os.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string(), "weights");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ConfigError(path.string() + " is not a checkpoint", "weights");
  std::string arch(get_u64(is), '\0');
  is.read(arch.data(), static_cast<std::streamsize>(arch.size()));
  Network net(ArchSpec::from_json(nlohmann::json::parse(arch)));
  auto params = net.params();
  if (get_u64(is) != params.size()) throw ConfigError(path.string() + ": parameter count mismatch", "weights");
  for (Param* p : params) {
    std::string name(get_u64(is), '\0');
    is.read(name.data(), static_cast<std::streamsize>(name.size()));
    if (name != p->name) throw ConfigError(path.string() + ": expected parameter " + p->name + ", found " + name, "weights");
    Shape shape(get_u64(is));
    for (auto& d : shape) d = get_u64(is);
    if (shape != p->value.shape()) throw ConfigError(path.string() + ": shape mismatch for " + name, "weights");
    is.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!is) throw ConfigError("truncated checkpoint", "weights");
  }
  return net;
}

}  // namespace namea::nn
