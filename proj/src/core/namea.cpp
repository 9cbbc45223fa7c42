#include "namea/core/namea.hpp"

#include <algorithm>

#include "namea/errors.hpp"
#include "namea/simd/kernels.hpp"

namespace namea::core {
namespace {

Tensor di_gradient(const model::ModelHandle& model, const Tensor& x, InnerContext& ctx, std::string_view what) {
  if (!uses_di(ctx.cfg.base_attack)) return model::input_gradient(model, x, ctx.labels, 1.0f, what);
  const auto plans = ctx.di.sample(x.dim(0), x.dim(2), ctx.di_rng);
  return ctx.di.adjoint(model::input_gradient(model, ctx.di.apply(x, plans), ctx.labels, 1.0f, what), plans);
}

std::size_t pick_test_model(std::size_t train_model, std::span<model::ModelHandle> ensemble, SelectionStrategy s,
                            Rng& rng) {
  if (s == SelectionStrategy::SameModel) return train_model;
  std::vector<std::size_t> pool;
  const auto fam = ensemble[train_model].family();
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const bool same = ensemble[i].family() == fam;
    if (s == SelectionStrategy::Random || (s == SelectionStrategy::DiffArch && !same) ||
        (s == SelectionStrategy::SameArch && same && i != train_model)) {
      pool.push_back(i);
    }
  }
  if (pool.empty()) {
    if (s == SelectionStrategy::DiffArch) {
      throw ConfigError("no surrogate of a different family", "selection_strategy");
    }
    return train_model;
  }
  return pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
}

/// x_te restricted to a region: keep * x_te, zero elsewhere.
Tensor keep_region(const Tensor& x, const Tensor& keep) {
  Tensor out(x.shape());
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) out[(i * c + ch) * hw + p] = x[(i * c + ch) * hw + p] * keep[i * hw + p];
  return out;
}

}  // namespace

ScheduleState::ScheduleState(std::size_t model_count, std::uint64_t seed)
    : sequence(model_count), n(model_count), rng(Rng::substream(seed, "schedule")) {
  if (model_count == 0) throw ConfigError("need at least one model", "surrogates");
  for (std::size_t i = 0; i < n; ++i) sequence[i] = i;
  std::shuffle(sequence.begin(), sequence.end(), rng.engine());
}

std::size_t next_model(ScheduleState& s) {
  const std::size_t slot = s.position % s.n;
  if (slot == 0 && s.position > 0) std::shuffle(s.sequence.begin(), s.sequence.end(), s.rng.engine());
  ++s.position;
  return s.sequence[slot];
}

void meta_train_step(MetaState& state, const model::ModelHandle& model, InnerContext& ctx) {
  state.g_tr = di_gradient(model, state.x_tr, ctx, "meta-train");
  state.x_tr = attack::clip_to_ball(attack::sign_step(state.x_tr, state.g_tr, ctx.cfg.step_size), ctx.x_clean,
                                    ctx.cfg.epsilon);
}

void nae_extract(MetaState& state, const model::ModelHandle& model, const Tensor& attention_input,
                 InnerContext& ctx) {
  const std::size_t n = state.x_te.dim(0), h = state.x_te.dim(2), w = state.x_te.dim(3);
  const auto maps = attention::gradcam(model, attention_input, ctx.labels);
  state.last_mask = Tensor({n, h, w});
  state.last_nonattn = Tensor({n, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    auto [m, mbar] = attention::attention_mask(maps[i], ctx.cfg.threshold);
    const Tensor image = state.x_te.slice(i, 1).reshaped({state.x_te.dim(1), h, w});
    const Tensor filled = attention::mask_fill(image, m, ctx.cfg.fill_mode, ctx.fill_rng);
    std::copy(filled.values().begin(), filled.values().end(), state.x_te.item(i).begin());
    std::copy(m.values.values().begin(), m.values.values().end(), state.last_mask.item(i).begin());
    std::copy(mbar.values.values().begin(), mbar.values.values().end(), state.last_nonattn.item(i).begin());
  }
}

void meta_test_step(MetaState& state, model::ModelHandle& model, InnerContext& ctx, const GsoConfig& gso) {
  model::GsoAttachment hook;
  if (gso.enabled) hook = model::attach_gso(model, gso);
  state.g_te = di_gradient(model, state.x_te, ctx, "meta-test");
  hook.detach();
  state.x_te = attack::clip_to_ball(attack::sign_step(state.x_te, state.g_te, ctx.cfg.step_size), ctx.x_clean,
                                    ctx.cfg.epsilon);
}

Tensor merge_gradients(const Tensor& g_tr, const Tensor& g_te, const Tensor& nonattn, float beta) {
  if (!g_tr.same_shape(g_te) || g_tr.rank() != 4 || nonattn.rank() != 3 || nonattn.dim(0) != g_tr.dim(0) ||
      nonattn.dim(1) != g_tr.dim(2) || nonattn.dim(2) != g_tr.dim(3)) {
    throw UsageError("merge_gradients: incompatible shapes " + shape_str(g_tr.shape()) + ", " +
                     shape_str(g_te.shape()) + ", " + shape_str(nonattn.shape()));
  }
  const std::size_t n = g_tr.dim(0), c = g_tr.dim(1), hw = g_tr.dim(2) * g_tr.dim(3);
  Tensor out(g_tr.shape());
  const auto& k = simd::active();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (i * c + ch) * hw;
      k.merge(g_tr.data() + off, g_te.data() + off, nonattn.data() + i * hw, beta, out.data() + off, hw);
    }
  }
  return out;
}

Tensor namea_attack(const Tensor& x, std::span<const int> labels, std::span<model::ModelHandle> ensemble,
                    const AttackConfig& cfg, Trace* trace) {
  cfg.validate();
  if (ensemble.empty()) throw ConfigError("ensemble needs at least one model", "surrogates");
  if (cfg.inner_loops < ensemble.size()) throw ConfigError("must be >= the number of surrogates", "inner_loops");
  if (labels.size() != x.dim(0)) throw UsageError("namea_attack: label count mismatch");
  const std::size_t iters = cfg.effective_outer_iters();
  if (iters == 0 || cfg.epsilon == 0.0f) return x;

  InnerContext ctx{cfg,
                   x,
                   std::vector<int>(labels.begin(), labels.end()),
                   attack::DiTransform(cfg.di_prob, cfg.di_scale),
                   Rng::substream(cfg.seed, "di"),
                   Rng::substream(cfg.seed, "fill")};
  ScheduleState schedule(ensemble.size(), cfg.seed);
  Rng select_rng = Rng::substream(cfg.seed, "select");
  Rng patch_rng = Rng::substream(cfg.seed, "patch");
  const GsoConfig gso{cfg.lambda1, cfg.lambda2, !cfg.drop_gso};
  attack::GradientProcessor proc(cfg, x.shape());
  const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const bool masked_merge = cfg.extracted_area == ExtractedArea::NonAttention;

  Tensor x_adv = x;
  for (std::size_t t = 0; t < iters; ++t) {
    MetaState st{x_adv, x_adv, {}, {}, {}, {}, 0};
    for (std::size_t k = 0; k < cfg.inner_loops; ++k) {
      st.inner_index = k;
      const std::size_t train_idx = next_model(schedule);
      const std::size_t test_idx = pick_test_model(train_idx, ensemble, cfg.selection_strategy, select_rng);
      InnerRecord rec;
      if (trace != nullptr) rec = InnerRecord{t, k, train_idx, test_idx, {}, {}, {}, {}, {}, {}};

      const Tensor x_tr_k = st.x_tr;
      if (!cfg.drop_meta_train) meta_train_step(st, ensemble[train_idx], ctx);

      if (!cfg.drop_meta_test) {
        switch (cfg.extracted_area) {
          case ExtractedArea::NonAttention:
            nae_extract(st, ensemble[test_idx], x_tr_k, ctx);
            break;
          case ExtractedArea::Attention: {
            const auto maps = attention::gradcam(ensemble[test_idx], x_tr_k, ctx.labels);
            st.last_mask = Tensor({n, h, w});
            for (std::size_t i = 0; i < n; ++i) {
              const auto mask = attention::attention_mask(maps[i], cfg.threshold).first;
              std::copy(mask.values.values().begin(), mask.values.values().end(), st.last_mask.item(i).begin());
            }
            st.x_te = keep_region(st.x_te, st.last_mask);
            break;
          }
          case ExtractedArea::RandomPatch: {
            const std::size_t side = std::max<std::size_t>(1, h / 4);
            st.last_mask = Tensor({n, h, w});
            for (std::size_t i = 0; i < n; ++i) {
              const auto top = static_cast<std::size_t>(patch_rng.uniform_int(0, static_cast<std::int64_t>(h - side)));
              const auto left = static_cast<std::size_t>(patch_rng.uniform_int(0, static_cast<std::int64_t>(w - side)));
              for (std::size_t y = top; y < top + side; ++y)
                for (std::size_t xx = left; xx < left + side; ++xx) st.last_mask[(i * h + y) * w + xx] = 1.0f;
            }
            st.x_te = keep_region(st.x_te, st.last_mask);
            break;
          }
        }
        if (trace != nullptr) rec.x_te_masked = st.x_te;
        meta_test_step(st, ensemble[test_idx], ctx, gso);
      }

      if (trace != nullptr) {
        rec.x_tr = st.x_tr;
        rec.g_tr = st.g_tr;
        rec.mask = st.last_mask;
        rec.g_te = st.g_te;
        rec.x_te = st.x_te;
        trace->inner.push_back(std::move(rec));
      }
    }

    Tensor g;
    if (cfg.drop_meta_test) {
      g = st.g_tr;
    } else {
      const Tensor keep = masked_merge ? st.last_nonattn : Tensor({n, h, w}, 1.0f);
      if (cfg.drop_meta_train) {
        g = merge_gradients(Tensor(st.g_te.shape()), st.g_te, keep, cfg.beta);
      } else {
        g = merge_gradients(st.g_tr, st.g_te, keep, cfg.beta);
      }
    }
    x_adv = attack::clip_to_ball(attack::sign_step(x_adv, proc.process(g), cfg.effective_outer_step()), x, cfg.epsilon);
    if (trace != nullptr) trace->outer.push_back({g, x_adv});
  }
  attack::check_budget(x_adv, x, cfg.epsilon);
  return x_adv;
}

}  // namespace namea::core
