#include "namea/config.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "namea/errors.hpp"

namespace namea {
namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& names, const char* key) {
  for (const auto& [value, name] : names) {
    if (name == s) return value;
  }
  throw ConfigError("unknown value '" + std::string(s) + "'", key);
}

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::array<std::pair<E, std::string_view>, N>& names) {
  for (const auto& [value, name] : names) {
    if (value == v) return name;
  }
  return "?";
}

constexpr std::array<std::pair<Method, std::string_view>, 2> kMethods{{{Method::NAMEA, "NAMEA"}, {Method::ENS, "ENS"}}};
constexpr std::array<std::pair<BaseAttack, std::string_view>, 6> kBases{{{BaseAttack::IFGSM, "IFGSM"},
                                                                         {BaseAttack::MIFGSM, "MIFGSM"},
                                                                         {BaseAttack::DIMIFGSM, "DIMIFGSM"},
                                                                         {BaseAttack::TIFGSM, "TIFGSM"},
                                                                         {BaseAttack::DITIMIFGSM, "DITIMIFGSM"},
                                                                         {BaseAttack::FGSM, "FGSM"}}};
constexpr std::array<std::pair<EnsembleMode, std::string_view>, 2> kEnsembleModes{
    {{EnsembleMode::Probabilities, "PROBABILITIES"}, {EnsembleMode::Logits, "LOGITS"}}};
constexpr std::array<std::pair<ExtractedArea, std::string_view>, 3> kAreas{
    {{ExtractedArea::NonAttention, "NON_ATTENTION"},
     {ExtractedArea::Attention, "ATTENTION"},
     {ExtractedArea::RandomPatch, "RANDOM_PATCH"}}};
constexpr std::array<std::pair<SelectionStrategy, std::string_view>, 4> kSelections{
    {{SelectionStrategy::SameModel, "SAME_MODEL"},
     {SelectionStrategy::DiffArch, "DIFF_ARCH"},
     {SelectionStrategy::SameArch, "SAME_ARCH"},
     {SelectionStrategy::Random, "RANDOM"}}};

}  // namespace

std::string_view to_string(Method v) { return name_of(v, kMethods); }
std::string_view to_string(BaseAttack v) { return name_of(v, kBases); }
std::string_view to_string(EnsembleMode v) { return name_of(v, kEnsembleModes); }
std::string_view to_string(ExtractedArea v) { return name_of(v, kAreas); }
std::string_view to_string(SelectionStrategy v) { return name_of(v, kSelections); }
Method method_from_string(std::string_view s) { return parse_enum(s, kMethods, "method"); }
BaseAttack base_attack_from_string(std::string_view s) { return parse_enum(s, kBases, "base_attack"); }
EnsembleMode ensemble_mode_from_string(std::string_view s) { return parse_enum(s, kEnsembleModes, "ensemble_mode"); }
ExtractedArea extracted_area_from_string(std::string_view s) { return parse_enum(s, kAreas, "extracted_area"); }
SelectionStrategy selection_strategy_from_string(std::string_view s) {
  return parse_enum(s, kSelections, "selection_strategy");
}

bool uses_di(BaseAttack b) { return b == BaseAttack::DIMIFGSM || b == BaseAttack::DITIMIFGSM; }
bool uses_ti(BaseAttack b) { return b == BaseAttack::TIFGSM || b == BaseAttack::DITIMIFGSM; }
bool uses_momentum(BaseAttack b) {
  return b == BaseAttack::MIFGSM || b == BaseAttack::DIMIFGSM || b == BaseAttack::DITIMIFGSM;
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0f && epsilon <= 1.0f)) throw ConfigError("must lie in [0,1]", "epsilon");
  if (!(step_size > 0.0f) && effective_outer_iters() > 0) throw ConfigError("must be > 0", "step_size");
  if (!(threshold >= 0.0f && threshold <= 1.0f)) throw ConfigError("must lie in [0,1]", "threshold");
  if (!(momentum >= 0.0f)) throw ConfigError("must be >= 0", "momentum");
  if (!(lambda1 >= 0.0)) throw ConfigError("must be >= 0", "lambda1");
  if (!(lambda2 >= 0.0)) throw ConfigError("must be >= 0", "lambda2");
  if (!(beta >= 0.0f)) throw ConfigError("must be >= 0", "beta");
  if (!(di_prob >= 0.0 && di_prob <= 1.0)) throw ConfigError("must lie in [0,1]", "di_prob");
  if (!(di_scale >= 1.0)) throw ConfigError("must be >= 1", "di_scale");
  if (ti_kernel == 0 || ti_kernel % 2 == 0) throw ConfigError("must be odd and >= 1", "ti_kernel");
  if (drop_meta_train && drop_meta_test) {
    throw ConfigError("dropping both meta-training and meta-testing leaves no gradient", "drop_meta_test");
  }
  if (method == Method::NAMEA && !surrogates.empty() && inner_loops < surrogates.size()) {
    throw ConfigError("must be >= the number of surrogates", "inner_loops");
  }
  if (method == Method::NAMEA && inner_loops == 0 && effective_outer_iters() > 0) {
    throw ConfigError("must be >= 1", "inner_loops");
  }
  if (batch_size == 0) throw ConfigError("must be >= 1", "batch_size");
  if (per_class == 0) throw ConfigError("must be >= 1", "per_class");
}

std::size_t AttackConfig::effective_outer_iters() const {
  return base_attack == BaseAttack::FGSM ? std::min<std::size_t>(outer_iters, 1) : outer_iters;
}

float AttackConfig::effective_outer_step() const { return base_attack == BaseAttack::FGSM ? epsilon : step_size; }

}  // namespace namea
