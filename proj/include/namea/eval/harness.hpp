#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "namea/batch.hpp"
#include "namea/config.hpp"
#include "namea/model/gateway.hpp"

namespace namea::eval {

/// ASR of one attack run against every target.
struct EvalResult {
  std::string attack_id;
  std::map<std::string, double> asr;         // target id -> fraction in [0,1]
  std::map<std::string, double> family_asr;  // "CNN" / "VIT" / "ALL" -> mean over targets
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  AttackConfig config;
};

/// `per_class` images per class drawn uniformly (seeded) from a
/// class-per-subdirectory set, keeping only images every surrogate
/// classifies correctly. Classes that run out are skipped with a warning.
ImageBatch sample_dataset(const std::filesystem::path& dataset_dir, std::size_t per_class, std::uint64_t seed,
                          std::span<const model::ModelHandle> surrogates);

std::vector<int> predict(const model::ModelHandle& model, const Tensor& images, std::size_t batch_size = 100);

/// Fraction of images whose top-1 prediction differs from the label.
double attack_success_rate(const model::ModelHandle& target, const Tensor& adv, std::span<const int> labels);

/// Runs cfg.method over `data` in chunks of cfg.batch_size.
Tensor run_attack(const ImageBatch& data, std::span<model::ModelHandle> surrogates, const AttackConfig& cfg);

/// Attack plus ASR on every target.
EvalResult evaluate_attack(const std::string& attack_id, const ImageBatch& data,
                           std::span<model::ModelHandle> surrogates, std::span<const model::ModelHandle> targets,
                           const AttackConfig& cfg);

/// Accuracy of every target after replacing the surrogate's top-`ratio`
/// attention pixels with Gaussian noise. Rows follow `ratios`, columns
/// follow `targets`.
struct MaskedAccuracyTable {
  std::vector<double> ratios;
  std::vector<std::string> targets;
  std::vector<double> clean;                 // per target
  std::vector<std::vector<double>> accuracy;  // [ratio][target]
};

MaskedAccuracyTable masked_accuracy_experiment(const model::ModelHandle& surrogate,
                                               std::span<const model::ModelHandle> targets,
                                               std::span<const double> ratios, const ImageBatch& data,
                                               std::uint64_t seed);

/// Mean IoU of the eta-thresholded attention masks for every model pair.
std::vector<std::vector<double>> overlap_experiment(std::span<const model::ModelHandle> models, const ImageBatch& data,
                                                    float eta);

enum class AblationKind { EtaSweep, Padding, MetaComponents, SelectionStrategy, ExtractedArea, BetaSweep, LambdaSweep };
AblationKind ablation_kind_from_string(std::string_view s);
std::string_view to_string(AblationKind k);

/// One grid point: a label and the config it runs.
struct AblationPoint {
  std::string label;
  AttackConfig config;
};

/// Expands a grid. Numeric sweeps take `values`; the categorical kinds use
/// their fixed settings and ignore `values` when it is empty.
std::vector<AblationPoint> ablation_grid(AblationKind kind, const AttackConfig& base, std::span<const double> values);

/// One EvalResult per grid point on the same samples and seeds.
std::vector<EvalResult> run_ablation(AblationKind kind, std::span<const double> values, const AttackConfig& base,
                                     const ImageBatch& data, std::span<model::ModelHandle> surrogates,
                                     std::span<const model::ModelHandle> targets);

}  // namespace namea::eval
