#pragma once

#include <cstdint>
#include <functional>

#include "namea/batch.hpp"
#include "namea/nn/network.hpp"

namespace namea::nn {

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 2e-3;
  double weight_decay = 1e-4;  // decoupled (AdamW)
  double warmup = 0.05;        // fraction of steps with linear warmup
  std::uint64_t seed = 0;
  bool augment = true;  // random shifts of up to 2 pixels
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

/// AdamW with linear warmup and cosine learning-rate decay on softmax
/// cross-entropy.
void train_classifier(Network& net, const ImageBatch& data, const TrainOptions& options,
                      const std::function<void(const EpochStats&)>& on_epoch = {});

/// Top-1 accuracy in [0,1], evaluated in chunks of `batch_size`.
double accuracy(const Network& net, const ImageBatch& data, std::size_t batch_size = 100);

}  // namespace namea::nn
