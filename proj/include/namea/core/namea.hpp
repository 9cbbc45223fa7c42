#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "namea/attack/base.hpp"
#include "namea/attention/attention.hpp"
#include "namea/config.hpp"
#include "namea/model/gateway.hpp"
#include "namea/rng.hpp"

namespace namea::core {

/// Model-index sequence S: next_model returns S[k mod N] and reshuffles S
/// before every N-th draw after the first, so every window of N consecutive
/// draws aligned to a multiple of N is a permutation of the models.
/// Indices are 0-based.
struct ScheduleState {
  std::vector<std::size_t> sequence;
  std::size_t position = 0;
  std::size_t n = 0;
  Rng rng;

  ScheduleState(std::size_t model_count, std::uint64_t seed);
};

std::size_t next_model(ScheduleState& schedule);

/// Inner-loop state of one outer iteration. Masks are [N,H,W], one plane per
/// image.
struct MetaState {
  Tensor x_tr;
  Tensor x_te;
  Tensor g_tr;
  Tensor g_te;
  Tensor last_mask;
  Tensor last_nonattn;
  std::size_t inner_index = 0;
};

/// Per-run collaborators shared by the inner steps.
struct InnerContext {
  const AttackConfig& cfg;
  Tensor x_clean;
  std::vector<int> labels;
  attack::DiTransform di;
  Rng di_rng;
  Rng fill_rng;
};

/// g_tr <- grad CE(model, DI(x_tr)); x_tr <- clip(sign_step(x_tr, g_tr, alpha)).
void meta_train_step(MetaState& state, const model::ModelHandle& model, InnerContext& ctx);

/// Attention of `model` on `attention_input` (the pre-step meta-training
/// example), thresholded at eta; the attention area of x_te is replaced by
/// the fill. Records M and its complement.
void nae_extract(MetaState& state, const model::ModelHandle& model, const Tensor& attention_input, InnerContext& ctx);

/// g_te <- grad CE(model, DI(x_te)) with GSO attached when enabled;
/// x_te <- clip(sign_step(x_te, g_te, alpha)).
void meta_test_step(MetaState& state, model::ModelHandle& model, InnerContext& ctx, const GsoConfig& gso);

/// g_tr + beta * (g_te * nonattn), the [N,H,W] mask broadcast over channels.
Tensor merge_gradients(const Tensor& g_tr, const Tensor& g_te, const Tensor& nonattn, float beta);

/// Snapshot of one inner loop, for inspection and tests.
struct InnerRecord {
  std::size_t t = 0, k = 0;
  std::size_t train_model = 0, test_model = 0;
  Tensor x_tr, g_tr;
  Tensor x_te_masked, mask, g_te, x_te;
};
struct OuterRecord {
  Tensor g, x_adv;
};
struct Trace {
  std::vector<InnerRecord> inner;
  std::vector<OuterRecord> outer;
};

/// The full attack: T outer iterations of K meta-train / NAE / meta-test
/// inner loops, merged gradient, base-attack processing and clipped outer
/// step.
Tensor namea_attack(const Tensor& x, std::span<const int> labels, std::span<model::ModelHandle> ensemble,
                    const AttackConfig& cfg, Trace* trace = nullptr);

}  // namespace namea::core
