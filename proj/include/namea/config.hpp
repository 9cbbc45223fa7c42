#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "namea/attention/attention.hpp"

namespace namea {

enum class Method { NAMEA, ENS };
enum class BaseAttack { IFGSM, MIFGSM, DIMIFGSM, TIFGSM, DITIMIFGSM, FGSM };
enum class EnsembleMode { Probabilities, Logits };
enum class ExtractedArea { NonAttention, Attention, RandomPatch };
enum class SelectionStrategy { SameModel, DiffArch, SameArch, Random };

std::string_view to_string(Method v);
std::string_view to_string(BaseAttack v);
std::string_view to_string(EnsembleMode v);
std::string_view to_string(ExtractedArea v);
std::string_view to_string(SelectionStrategy v);
Method method_from_string(std::string_view s);
BaseAttack base_attack_from_string(std::string_view s);
EnsembleMode ensemble_mode_from_string(std::string_view s);
ExtractedArea extracted_area_from_string(std::string_view s);
SelectionStrategy selection_strategy_from_string(std::string_view s);

bool uses_di(BaseAttack b);
bool uses_ti(BaseAttack b);
bool uses_momentum(BaseAttack b);

/// Every knob of one attack run. Defaults are the reference settings.
struct AttackConfig {
  Method method = Method::NAMEA;
  BaseAttack base_attack = BaseAttack::IFGSM;

  float epsilon = 8.0f / 255.0f;
  float step_size = 0.8f / 255.0f;
  std::size_t outer_iters = 10;
  std::size_t inner_loops = 16;
  float threshold = 0.6f;
  float momentum = 1.0f;
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  float beta = 1.0f;
  attention::FillMode fill_mode = attention::FillMode::Gaussian;

  double di_prob = 0.5;
  double di_scale = 1.1;
  std::size_t ti_kernel = 7;
  EnsembleMode ensemble_mode = EnsembleMode::Probabilities;

  bool drop_meta_train = false;
  bool drop_meta_test = false;
  bool drop_gso = false;
  ExtractedArea extracted_area = ExtractedArea::NonAttention;
  SelectionStrategy selection_strategy = SelectionStrategy::SameModel;

  std::uint64_t seed = 0;
  std::vector<std::string> surrogates;
  std::vector<std::string> targets;

  // Run plumbing.
  std::string registry;        // model registry; empty = <data root>/models/registry.json
  std::string dataset;         // class-per-directory image set; empty = <data root>/test
  std::size_t per_class = 20;  // sampled images per class
  std::size_t batch_size = 20;

  /// Throws ConfigError naming the first offending key.
  void validate() const;
  /// FGSM runs one outer step of size epsilon.
  std::size_t effective_outer_iters() const;
  float effective_outer_step() const;
};

}  // namespace namea
