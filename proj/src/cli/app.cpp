#include "namea/cli/app.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <optional>

#include "namea/cli/config_io.hpp"
#include "namea/cli/records.hpp"
#include "namea/data/dataset.hpp"
#include "namea/errors.hpp"
#include "namea/eval/harness.hpp"
#include "namea/model/zoo.hpp"

namespace namea::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::string records;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON attack configuration");
  cmd->add_option("--seed", c.seed, "Overrides the configured seed");
  cmd->add_option("--out", c.out, "Artifact directory")->capture_default_str();
  cmd->add_option("--records", c.records, "Record file (default: <out>/records.jsonl)");
}

AttackConfig resolve_config(const Common& c) {
  AttackConfig cfg = c.config_path.empty() ? AttackConfig{} : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  const auto zoo = model::default_zoo();
  if (cfg.surrogates.empty()) cfg.surrogates = model::zoo_ids(zoo, model::ZooRole::Surrogate);
  if (cfg.targets.empty()) cfg.targets = model::zoo_ids(zoo, model::ZooRole::Target);
  if (cfg.registry.empty()) cfg.registry = "models/registry.json";
  if (cfg.dataset.empty()) cfg.dataset = (data::data_root() / "test").string();
  cfg.validate();
  return cfg;
}

fs::path records_path(const Common& c) { return c.records.empty() ? fs::path(c.out) / "records.jsonl" : fs::path(c.records); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Session {
  AttackConfig cfg;
  std::vector<model::ModelHandle> surrogates, targets;
  ImageBatch data;
};

Session open_session(const AttackConfig& cfg, RunRecord& rec, bool need_data = true) {
  auto t0 = std::chrono::steady_clock::now();
  Session s{cfg, {}, {}, {}};
  const auto registry = model::load_registry(cfg.registry);
  s.surrogates = model::load_models(registry, cfg.surrogates);
  s.targets = model::load_models(registry, cfg.targets);
  rec.timings["load_models"] = seconds_since(t0);
  if (need_data) {
    t0 = std::chrono::steady_clock::now();
    s.data = eval::sample_dataset(cfg.dataset, cfg.per_class, cfg.seed, s.surrogates);
    rec.timings["sample"] = seconds_since(t0);
    spdlog::info("sampled {} images from {}", s.data.size(), cfg.dataset);
  }
  return s;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'", "values");
    }
  }
  return out;
}

void log_result(const eval::EvalResult& r) {
  for (const auto& [t, v] : r.asr) spdlog::info("  {:<10} {:<8} ASR {:.2f}%", r.attack_id, t, 100.0 * v);
  for (const auto& [f, v] : r.family_asr) spdlog::info("  {:<10} mean {:<4} ASR {:.2f}%", r.attack_id, f, 100.0 * v);
}

}  // namespace

int run_main(int argc, char** argv) {
  CLI::App app{"Non-attention meta-ensemble attack toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string attack_id;
  auto* attack = app.add_subcommand("attack", "Run one attack and measure ASR on the targets");
  add_common(attack, common);
  attack->add_option("--id", attack_id, "Label of the result column (default: method/base attack)");

  std::string kind_name, values_text;
  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid on shared samples and seeds");
  add_common(ablate, common);
  ablate->add_option("--kind", kind_name,
                     "ETA_SWEEP, PADDING, META_COMPONENTS, SELECTION_STRATEGY, EXTRACTED_AREA, BETA_SWEEP or LAMBDA_SWEEP")
      ->required();
  ablate->add_option("--values", values_text, "Comma-separated sweep values");

  auto* overlap = app.add_subcommand("overlap", "Pairwise attention-mask IoU of surrogates and targets");
  add_common(overlap, common);

  std::string mask_surrogate, ratios_text = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
  auto* masked = app.add_subcommand("masked-acc", "Target accuracy after masking a surrogate's attention");
  add_common(masked, common);
  masked->add_option("--surrogate", mask_surrogate, "Model whose attention is masked (default: first surrogate)");
  masked->add_option("--ratios", ratios_text, "Comma-separated mask ratios")->capture_default_str();

  std::string table_records;
  auto* table = app.add_subcommand("table", "CSV of ASRs (rows: targets, columns: attacks) from a record file");
  table->add_option("--records", table_records, "Record file")->required();
  table->add_option("--out", common.out, "Artifact directory")->capture_default_str();

  std::string root_opt;
  std::size_t per_class = 200;
  std::uint64_t data_seed = 2;
  auto* gen = app.add_subcommand("gen-data", "Write the synthetic evaluation set as class_<k>/<n>.png");
  gen->add_option("--out", root_opt, "Output directory (default: $NAMEA_DATA_ROOT/test, else data/test)");
  gen->add_option("--per-class", per_class, "Images per class")->capture_default_str();
  gen->add_option("--seed", data_seed, "Generator seed")->capture_default_str();

  std::string models_dir = "models";
  std::size_t train_per_class = 1000;
  auto* train = app.add_subcommand("train", "Train the model zoo (models whose weights exist are kept)");
  train->add_option("--out", models_dir, "Model directory")->capture_default_str();
  train->add_option("--per-class", train_per_class, "Training images per class")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  RunRecord rec;
  std::optional<fs::path> record_file;
  try {
    if (*gen) {
      const fs::path dir = root_opt.empty() ? data::data_root() / "test" : fs::path(root_opt);
      data::write_dataset(dir, data::generate_synthetic(per_class, data_seed));
      spdlog::info("wrote {} images to {}", per_class * data::kSynthClasses, dir.string());
      return 0;
    }
    if (*train) {
      const ImageBatch train_set = data::generate_synthetic(train_per_class, 1);
      const ImageBatch test_set = data::generate_synthetic(100, 2);
      const auto reports = model::build_zoo(models_dir, model::default_zoo(), train_set, test_set,
                                            [](const std::string& id, const nn::EpochStats& s) {
                                              spdlog::info("{} epoch {} loss {:.4f} train acc {:.3f}", id, s.epoch,
                                                           s.loss, s.accuracy);
                                            });
      for (const auto& r : reports) {
        spdlog::info("{} test accuracy {:.3f}{}", r.id, r.test_accuracy, r.trained ? "" : " (cached)");
      }
      return 0;
    }
    if (*table) {
      const auto records = read_records(table_records);
      std::vector<eval::EvalResult> results;
      for (const auto& r : records) {
        if (r.status != "OK") continue;
        results.insert(results.end(), r.results.begin(), r.results.end());
      }
      if (results.empty()) throw UsageError("no successful attack results in " + table_records);
      const auto path = artifact_path(common.out, "table", 0, fmt::format("{:08x}", fnv1a64(table_records) & 0xffffffffu), "csv");
      write_asr_csv(path, results);
      spdlog::info("wrote {}", path.string());
      return 0;
    }

    record_file = records_path(common);
    rec.version = version_tag();
    rec.command = attack->parsed() ? "attack" : ablate->parsed() ? "ablate" : overlap->parsed() ? "overlap" : "masked-acc";
    rec.config = resolve_config(common);
    rec.config_hash = config_hash(rec.config);
    const AttackConfig& cfg = rec.config;
    const std::string hash = rec.config_hash;
    const auto t0 = std::chrono::steady_clock::now();

    if (*attack) {
      Session s = open_session(cfg, rec);
      const std::string id =
          !attack_id.empty() ? attack_id
                             : fmt::format("{}-{}", to_string(cfg.method), to_string(cfg.base_attack));
      rec.results.push_back(eval::evaluate_attack(id, s.data, s.surrogates, s.targets, cfg));
      log_result(rec.results.back());
      const auto csv = artifact_path(common.out, "attack", cfg.seed, hash, "csv");
      write_asr_csv(csv, rec.results);
      rec.extra["artifacts"] = {csv.string()};
    } else if (*ablate) {
      const auto kind = eval::ablation_kind_from_string(kind_name);
      const auto values = parse_list(values_text);
      Session s = open_session(cfg, rec);
      rec.results = eval::run_ablation(kind, values, cfg, s.data, s.surrogates, s.targets);
      for (const auto& r : rec.results) log_result(r);
      const std::string stem = "ablate_" + std::string(eval::to_string(kind));
      const auto csv = artifact_path(common.out, stem, cfg.seed, hash, "csv");
      write_asr_csv(csv, rec.results);
      rec.extra["kind"] = std::string(eval::to_string(kind));
      rec.extra["artifacts"] = {csv.string()};
      if (kind == eval::AblationKind::EtaSweep || kind == eval::AblationKind::BetaSweep ||
          kind == eval::AblationKind::LambdaSweep) {
        const auto grid = eval::ablation_grid(kind, cfg, values);
        std::vector<double> xs;
        for (const auto& p : grid) {
          xs.push_back(kind == eval::AblationKind::EtaSweep    ? p.config.threshold
                       : kind == eval::AblationKind::BetaSweep ? p.config.beta
                                                               : p.config.lambda2);
        }
        std::vector<Series> series;
        for (const std::string fam : {"CNN", "VIT", "ALL"}) {
          Series sr{"mean " + fam, {}};
          for (const auto& r : rec.results) sr.y.push_back(r.family_asr.count(fam) ? r.family_asr.at(fam) : 0.0);
          series.push_back(sr);
        }
        const auto svg = artifact_path(common.out, stem, cfg.seed, hash, "svg");
        write_line_plot(svg, "ASR vs " + rec.results.front().attack_id.substr(0, rec.results.front().attack_id.find('=')),
                        rec.results.front().attack_id.substr(0, rec.results.front().attack_id.find('=')), "ASR", xs,
                        series);
        rec.extra["artifacts"].push_back(svg.string());
      }
    } else if (*overlap) {
      Session s = open_session(cfg, rec);
      std::vector<model::ModelHandle> all;
      std::vector<std::string> labels;
      for (auto* group : {&s.surrogates, &s.targets}) {
        for (auto& m : *group) {
          labels.push_back(m.id());
          all.push_back(std::move(m));
        }
      }
      const auto matrix = eval::overlap_experiment(all, s.data, cfg.threshold);
      const auto csv = artifact_path(common.out, "overlap", cfg.seed, hash, "csv");
      write_matrix_csv(csv, labels, matrix);
      rec.extra = {{"models", labels}, {"overlap", matrix}, {"artifacts", {csv.string()}}};
      spdlog::info("wrote {}", csv.string());
    } else {
      Session s = open_session(cfg, rec);
      const auto ratios = parse_list(ratios_text);
      const std::string sid = mask_surrogate.empty() ? cfg.surrogates.front() : mask_surrogate;
      const auto registry = model::load_registry(cfg.registry);
      const std::vector<std::string> sids{sid};
      const auto sur = model::load_models(registry, sids);
      const auto tbl = eval::masked_accuracy_experiment(sur.front(), s.targets, ratios, s.data, cfg.seed);
      const auto csv = artifact_path(common.out, "masked_acc", cfg.seed, hash, "csv");
      write_masked_csv(csv, tbl);
      std::vector<double> xs{0.0};
      xs.insert(xs.end(), tbl.ratios.begin(), tbl.ratios.end());
      std::vector<Series> series;
      for (std::size_t t = 0; t < tbl.targets.size(); ++t) {
        Series sr{tbl.targets[t], {tbl.clean[t]}};
        for (const auto& row : tbl.accuracy) sr.y.push_back(row[t]);
        series.push_back(sr);
      }
      const auto svg = artifact_path(common.out, "masked_acc", cfg.seed, hash, "svg");
      write_line_plot(svg, "Accuracy after masking " + sid + " attention", "mask ratio", "accuracy", xs, series);
      rec.extra = {{"surrogate", sid},
                   {"ratios", tbl.ratios},
                   {"targets", tbl.targets},
                   {"clean", tbl.clean},
                   {"accuracy", tbl.accuracy},
                   {"artifacts", {csv.string(), svg.string()}}};
      for (std::size_t t = 0; t < tbl.targets.size(); ++t) {
        std::string line = fmt::format("{:<8} clean {:.3f}", tbl.targets[t], tbl.clean[t]);
        for (std::size_t r = 0; r < tbl.ratios.size(); ++r) line += fmt::format(" | {:g}: {:.3f}", tbl.ratios[r], tbl.accuracy[r][t]);
        spdlog::info("{}", line);
      }
    }
    rec.timings["total"] = seconds_since(t0);
    append_record(*record_file, rec);
    spdlog::info("record appended to {}", record_file->string());
  } catch (const std::exception& e) {
    const bool config_error = dynamic_cast<const ConfigError*>(&e) != nullptr;
    spdlog::error("{}{}", config_error ? "configuration error: " : "", e.what());
    if (record_file) {
      rec.status = "FAILED";
      rec.error = e.what();
      try {
        append_record(*record_file, rec);
      } catch (const std::exception& e2) {
        spdlog::error("could not write failure record: {}", e2.what());
      }
    }
    return config_error ? 2 : 1;
  }
  return 0;
}

}  // namespace namea::cli
