#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "namea/batch.hpp"
#include "namea/model/gateway.hpp"
#include "namea/nn/train.hpp"

namespace namea::model {

enum class ZooRole { Surrogate, Target };

struct ZooMember {
  std::string id;
  ZooRole role = ZooRole::Surrogate;
  nn::ArchSpec arch;
  nn::TrainOptions train;
};

/// Two CNN and two ViT surrogates plus two CNN and two ViT held-out targets,
/// all sized for CPU training on the synthetic set.
std::vector<ZooMember> default_zoo();
std::vector<std::string> zoo_ids(const std::vector<ZooMember>& zoo, ZooRole role);

struct ZooReport {
  std::string id;
  double test_accuracy = 0.0;
  bool trained = false;  // false when the checkpoint was already present
};

/// Trains every member whose checkpoint `<dir>/<id>.bin` is missing, then
/// writes `<dir>/registry.json` covering the whole zoo.
std::vector<ZooReport> build_zoo(const std::filesystem::path& dir, const std::vector<ZooMember>& zoo,
                                 const ImageBatch& train_set, const ImageBatch& test_set,
                                 const std::function<void(const std::string&, const nn::EpochStats&)>& on_epoch = {});

}  // namespace namea::model
