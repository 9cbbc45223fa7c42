#include "namea/model/zoo.hpp"

#include <spdlog/spdlog.h>

namespace namea::model {
namespace {

ZooMember cnn(std::string id, ZooRole role, std::vector<nn::CnnBlockSpec> blocks, std::uint64_t seed) {
  ZooMember m{std::move(id), role, {}, {}};
  m.arch.name = m.id;
  m.arch.family = Family::CNN;
  m.arch.blocks = std::move(blocks);
  m.train.epochs = 10;
  m.train.batch_size = 32;
  m.train.learning_rate = 1e-3;
  m.train.seed = seed;
  return m;
}

ZooMember vit(std::string id, ZooRole role, std::size_t dim, std::size_t depth, std::size_t heads, bool mean_pool,
              std::uint64_t seed) {
  ZooMember m{std::move(id), role, {}, {}};
  m.arch.name = m.id;
  m.arch.family = Family::VIT;
  m.arch.patch = 4;
  m.arch.dim = dim;
  m.arch.depth = depth;
  m.arch.heads = heads;
  m.arch.mlp_hidden = 2 * dim;
  m.arch.mean_pool = mean_pool;
  m.train.epochs = 20;
  m.train.batch_size = 32;
  m.train.learning_rate = 1.5e-3;
  m.train.seed = seed;
  return m;
}

}  // namespace

std::vector<ZooMember> default_zoo() {
  using B = nn::CnnBlockSpec;
  const auto S = ZooRole::Surrogate, T = ZooRole::Target;
  return {
      cnn("cnn_s1", S, {B{16, 1, false}, B{32, 2, false}, B{32, 1, false}, B{48, 2, false}, B{48, 1, false}, B{64, 1, false}}, 11),
      cnn("cnn_s2", S, {B{16, 1, false}, B{32, 2, true}, B{32, 1, true}, B{64, 2, true}, B{64, 1, true}}, 12),
      vit("vit_s1", S, 48, 3, 3, false, 13),
      vit("vit_s2", S, 32, 4, 2, true, 14),
      cnn("cnn_t1", T, {B{24, 1, false}, B{48, 2, false}, B{64, 2, false}, B{64, 1, false}}, 21),
      cnn("cnn_t2", T, {B{16, 1, false}, B{24, 1, true}, B{48, 2, true}, B{48, 1, true}, B{64, 2, true}, B{64, 1, true}}, 22),
      vit("vit_t1", T, 64, 2, 4, false, 23),
      vit("vit_t2", T, 48, 4, 4, true, 24),
  };
}

std::vector<std::string> zoo_ids(const std::vector<ZooMember>& zoo, ZooRole role) {
  std::vector<std::string> ids;
  for (const auto& m : zoo) {
    if (m.role == role) ids.push_back(m.id);
  }
  return ids;
}

std::vector<ZooReport> build_zoo(const std::filesystem::path& dir, const std::vector<ZooMember>& zoo,
                                 const ImageBatch& train_set, const ImageBatch& test_set,
                                 const std::function<void(const std::string&, const nn::EpochStats&)>& on_epoch) {
  std::filesystem::create_directories(dir);
  std::vector<ZooReport> reports;
  std::vector<RegistryEntry> entries;
  for (const auto& m : zoo) {
    const auto path = dir / (m.id + ".bin");
    ZooReport rep{m.id, 0.0, false};
    std::optional<nn::Network> net;
    if (std::filesystem::exists(path)) {
      net.emplace(nn::load_checkpoint(path));
    } else {
      spdlog::info("training {} ({} parameters)", m.id, nn::Network(m.arch).parameter_count());
      net.emplace(m.arch);
      net->initialize(m.train.seed);
      nn::train_classifier(*net, train_set, m.train, [&](const nn::EpochStats& s) {
        if (on_epoch) on_epoch(m.id, s);
      });
      nn::save_checkpoint(*net, path);
      rep.trained = true;
    }
    rep.test_accuracy = nn::accuracy(*net, test_set);
    const ModelHandle handle(m.id, net->clone());
    entries.push_back({m.id, path, handle.family(), handle.tap_layer(), handle.layer_count(), handle.channel_count()});
    reports.push_back(rep);
  }
  save_registry(dir / "registry.json", entries);
  return reports;
}

}  // namespace namea::model
