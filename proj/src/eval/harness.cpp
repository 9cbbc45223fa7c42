#include "namea/eval/harness.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>

#include "namea/attack/base.hpp"
#include "namea/attention/attention.hpp"
#include "namea/core/namea.hpp"
#include "namea/data/dataset.hpp"
#include "namea/errors.hpp"

namespace namea::eval {

std::vector<int> predict(const model::ModelHandle& model, const Tensor& images, std::size_t batch_size) {
  std::vector<int> out;
  const std::size_t n = images.dim(0);
  out.reserve(n);
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t m = std::min(batch_size, n - begin);
    const Tensor logits = model::forward_logits(model, images.slice(begin, m));
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < m; ++i) {
      const float* z = logits.data() + i * k;
      out.push_back(static_cast<int>(std::max_element(z, z + k) - z));
    }
  }
  return out;
}

ImageBatch sample_dataset(const std::filesystem::path& dataset_dir, std::size_t per_class, std::uint64_t seed,
                          std::span<const model::ModelHandle> surrogates) {
  if (per_class == 0) throw ConfigError("must be >= 1", "per_class");
  const data::DatasetIndex index = data::index_dataset(dataset_dir);
  Rng rng = Rng::substream(seed, "sample");
  std::vector<ImageBatch> picked;
  for (std::size_t c = 0; c < index.by_class.size(); ++c) {
    std::vector<data::DatasetEntry> pool = index.by_class[c];
    std::shuffle(pool.begin(), pool.end(), rng.engine());
    std::vector<data::DatasetEntry> kept;
    for (std::size_t begin = 0; begin < pool.size() && kept.size() < per_class; begin += per_class) {
      const std::vector<data::DatasetEntry> chunk(pool.begin() + static_cast<std::ptrdiff_t>(begin),
                                                  pool.begin() + static_cast<std::ptrdiff_t>(std::min(pool.size(), begin + per_class)));
      const ImageBatch b = data::load_entries(chunk);
      std::vector<bool> ok(chunk.size(), true);
      for (const auto& s : surrogates) {
        const auto pred = predict(s, b.images);
        for (std::size_t i = 0; i < chunk.size(); ++i) ok[i] = ok[i] && pred[i] == b.labels[i];
      }
      for (std::size_t i = 0; i < chunk.size() && kept.size() < per_class; ++i) {
        if (ok[i]) kept.push_back(chunk[i]);
      }
    }
    if (kept.size() < per_class) {
      spdlog::warn("class {}: only {} of {} requested images are classified correctly by every surrogate",
                   index.class_names[c], kept.size(), per_class);
    }
    if (!kept.empty()) picked.push_back(data::load_entries(kept));
  }
  if (picked.empty()) throw Error("sample_dataset: no usable images in " + dataset_dir.string());
  ImageBatch out;
  std::vector<Tensor> parts;
  for (auto& b : picked) {
    parts.push_back(std::move(b.images));
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    out.tags.insert(out.tags.end(), b.tags.begin(), b.tags.end());
  }
  out.images = stack(parts, true);
  return out;
}

double attack_success_rate(const model::ModelHandle& target, const Tensor& adv, std::span<const int> labels) {
  if (labels.size() != adv.dim(0)) throw UsageError("attack_success_rate: label count mismatch");
  if (labels.empty()) return 0.0;
  const auto pred = predict(target, adv);
  std::size_t fooled = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) fooled += pred[i] != labels[i] ? 1 : 0;
  return static_cast<double>(fooled) / static_cast<double>(labels.size());
}

Tensor run_attack(const ImageBatch& data, std::span<model::ModelHandle> surrogates, const AttackConfig& cfg) {
  cfg.validate();
  Tensor out(data.images.shape());
  const std::size_t n = data.size();
  for (std::size_t begin = 0, chunk = 0; begin < n; begin += cfg.batch_size, ++chunk) {
    const std::size_t m = std::min(cfg.batch_size, n - begin);
    AttackConfig local = cfg;
    local.seed = cfg.seed * 1000003ULL + chunk;
    const Tensor x = data.images.slice(begin, m);
    const std::span<const int> y(data.labels.data() + begin, m);
    const Tensor adv = cfg.method == Method::NAMEA ? core::namea_attack(x, y, surrogates, local)
                                                   : attack::ens_attack(x, y, surrogates, local);
    std::copy(adv.values().begin(), adv.values().end(), out.item(begin).begin());
  }
  return out;
}

EvalResult evaluate_attack(const std::string& attack_id, const ImageBatch& data,
                           std::span<model::ModelHandle> surrogates, std::span<const model::ModelHandle> targets,
                           const AttackConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Tensor adv = run_attack(data, surrogates, cfg);
  EvalResult r;
  r.attack_id = attack_id;
  r.samples = data.size();
  r.seed = cfg.seed;
  r.config = cfg;
  std::map<std::string, std::pair<double, std::size_t>> fam;
  for (const auto& t : targets) {
    const double asr = attack_success_rate(t, adv, data.labels);
    r.asr[t.id()] = asr;
    for (const std::string& key : {std::string(nn::to_string(t.family())), std::string("ALL")}) {
      fam[key].first += asr;
      fam[key].second += 1;
    }
  }
  for (const auto& [k, v] : fam) r.family_asr[k] = v.first / static_cast<double>(v.second);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

MaskedAccuracyTable masked_accuracy_experiment(const model::ModelHandle& surrogate,
                                               std::span<const model::ModelHandle> targets,
                                               std::span<const double> ratios, const ImageBatch& data,
                                               std::uint64_t seed) {
  MaskedAccuracyTable table;
  table.ratios.assign(ratios.begin(), ratios.end());
  for (const auto& t : targets) table.targets.push_back(t.id());
  const std::size_t n = data.size(), c = data.images.dim(1), h = data.images.dim(2), w = data.images.dim(3);

  std::vector<attention::AttentionMap> maps;
  for (std::size_t begin = 0; begin < n; begin += 50) {
    const std::size_t m = std::min<std::size_t>(50, n - begin);
    auto part = attention::gradcam(surrogate, data.images.slice(begin, m), std::span<const int>(data.labels.data() + begin, m));
    for (auto& a : part) maps.push_back(std::move(a));
  }

  const auto accuracy_of = [&](const Tensor& images, const model::ModelHandle& t) {
    const auto pred = predict(t, images);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) ok += pred[i] == data.labels[i] ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(n);
  };
  for (const auto& t : targets) table.clean.push_back(accuracy_of(data.images, t));

  for (const double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("mask ratios must lie in [0,1]", "mask_ratios");
    Rng rng = Rng::substream(seed, "masked-fill");
    Tensor masked(data.images.shape());
    for (std::size_t i = 0; i < n; ++i) {
      const auto mask = attention::quantile_mask(maps[i], r);
      const Tensor img = data.images.slice(i, 1).reshaped({c, h, w});
      const Tensor filled = attention::mask_fill(img, mask, attention::FillMode::Gaussian, rng);
      std::copy(filled.values().begin(), filled.values().end(), masked.item(i).begin());
    }
    std::vector<double> row;
    for (const auto& t : targets) row.push_back(accuracy_of(masked, t));
    table.accuracy.push_back(std::move(row));
  }
  return table;
}

std::vector<std::vector<double>> overlap_experiment(std::span<const model::ModelHandle> models, const ImageBatch& data,
                                                    float eta) {
  if (models.size() < 2) throw ConfigError("need at least two models", "surrogates");
  const std::size_t n = data.size(), k = models.size();
  std::vector<std::vector<attention::BinaryMask>> masks(k);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t begin = 0; begin < n; begin += 50) {
      const std::size_t cnt = std::min<std::size_t>(50, n - begin);
      const auto maps = attention::gradcam(models[m], data.images.slice(begin, cnt),
                                           std::span<const int>(data.labels.data() + begin, cnt));
      for (const auto& a : maps) masks[m].push_back(attention::attention_mask(a, eta).first);
    }
  }
  std::vector<std::vector<double>> out(k, std::vector<double>(k, 1.0));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += attention::overlap_ratio(masks[a][i], masks[b][i]);
      out[a][b] = out[b][a] = n == 0 ? 0.0 : s / static_cast<double>(n);
    }
  }
  return out;
}

AblationKind ablation_kind_from_string(std::string_view s) {
  if (s == "ETA_SWEEP") return AblationKind::EtaSweep;
  if (s == "PADDING") return AblationKind::Padding;
  if (s == "META_COMPONENTS") return AblationKind::MetaComponents;
  if (s == "SELECTION_STRATEGY") return AblationKind::SelectionStrategy;
  if (s == "EXTRACTED_AREA") return AblationKind::ExtractedArea;
  if (s == "BETA_SWEEP") return AblationKind::BetaSweep;
  if (s == "LAMBDA_SWEEP") return AblationKind::LambdaSweep;
  throw ConfigError("unknown ablation kind '" + std::string(s) + "'", "ablation");
}

std::string_view to_string(AblationKind k) {
  switch (k) {
    case AblationKind::EtaSweep: return "ETA_SWEEP";
    case AblationKind::Padding: return "PADDING";
    case AblationKind::MetaComponents: return "META_COMPONENTS";
    case AblationKind::SelectionStrategy: return "SELECTION_STRATEGY";
    case AblationKind::ExtractedArea: return "EXTRACTED_AREA";
    case AblationKind::BetaSweep: return "BETA_SWEEP";
    case AblationKind::LambdaSweep: return "LAMBDA_SWEEP";
  }
  return "?";
}

std::vector<AblationPoint> ablation_grid(AblationKind kind, const AttackConfig& base, std::span<const double> values) {
  std::vector<AblationPoint> grid;
  const auto point = [&](std::string label, auto&& edit) {
    AttackConfig c = base;
    c.method = Method::NAMEA;
    edit(c);
    grid.push_back({std::move(label), c});
  };
  const auto sweep = [&](std::vector<double> defaults, const char* name, auto&& set) {
    const std::vector<double> vs = values.empty() ? defaults : std::vector<double>(values.begin(), values.end());
    for (const double v : vs) point(std::string(name) + "=" + fmt::format("{:g}", v), [&](AttackConfig& c) { set(c, v); });
  };
  switch (kind) {
    case AblationKind::EtaSweep:
      sweep({0.2, 0.4, 0.6, 0.8}, "eta", [](AttackConfig& c, double v) { c.threshold = static_cast<float>(v); });
      break;
    case AblationKind::BetaSweep:
      sweep({0.5, 1.0, 1.5, 2.0}, "beta", [](AttackConfig& c, double v) { c.beta = static_cast<float>(v); });
      break;
    case AblationKind::LambdaSweep:
      sweep({0.0, 0.05, 0.1, 0.2}, "lambda2", [](AttackConfig& c, double v) { c.lambda2 = v; });
      break;
    case AblationKind::Padding:
      for (const auto m : {attention::FillMode::Gaussian, attention::FillMode::Zeros, attention::FillMode::Ones}) {
        point(std::string(attention::to_string(m)), [&](AttackConfig& c) { c.fill_mode = m; });
      }
      break;
    case AblationKind::MetaComponents:
      point("full", [](AttackConfig&) {});
      point("-M_train", [](AttackConfig& c) { c.drop_meta_train = true; });
      point("-M_test", [](AttackConfig& c) { c.drop_meta_test = true; });
      point("-GSO", [](AttackConfig& c) { c.drop_gso = true; });
      break;
    case AblationKind::SelectionStrategy:
      for (const auto s : {SelectionStrategy::SameModel, SelectionStrategy::DiffArch, SelectionStrategy::SameArch,
                           SelectionStrategy::Random}) {
        point(std::string(to_string(s)), [&](AttackConfig& c) { c.selection_strategy = s; });
      }
      break;
    case AblationKind::ExtractedArea:
      for (const auto a : {ExtractedArea::NonAttention, ExtractedArea::Attention, ExtractedArea::RandomPatch}) {
        point(std::string(to_string(a)), [&](AttackConfig& c) { c.extracted_area = a; });
      }
      break;
  }
  for (const auto& p : grid) p.config.validate();
  return grid;
}

std::vector<EvalResult> run_ablation(AblationKind kind, std::span<const double> values, const AttackConfig& base,
                                     const ImageBatch& data, std::span<model::ModelHandle> surrogates,
                                     std::span<const model::ModelHandle> targets) {
  std::vector<EvalResult> out;
  for (const auto& p : ablation_grid(kind, base, values)) {
    spdlog::info("ablation {}: {}", to_string(kind), p.label);
    out.push_back(evaluate_attack(p.label, data, surrogates, targets, p.config));
  }
  return out;
}

}  // namespace namea::eval
