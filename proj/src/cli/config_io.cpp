#include "namea/cli/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "namea/errors.hpp"
#include "namea/rng.hpp"

namespace namea::cli {
namespace {

using nlohmann::json;
using Setter = std::function<void(AttackConfig&, const json&)>;

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("expected a boolean", key);
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!v.is_number()) throw ConfigError("expected a number", key);
      if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer", key);
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("expected a string", key);
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(e.what(), key);
  }
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["method"] = [](AttackConfig& c, const json& v) { c.method = method_from_string(get_as<std::string>(v, "method")); };
    t["base_attack"] = [](AttackConfig& c, const json& v) {
      c.base_attack = base_attack_from_string(get_as<std::string>(v, "base_attack"));
    };
    t["epsilon"] = [](AttackConfig& c, const json& v) { c.epsilon = get_as<float>(v, "epsilon"); };
    t["step_size"] = [](AttackConfig& c, const json& v) { c.step_size = get_as<float>(v, "step_size"); };
    t["outer_iters"] = [](AttackConfig& c, const json& v) { c.outer_iters = get_as<std::size_t>(v, "outer_iters"); };
    t["inner_loops"] = [](AttackConfig& c, const json& v) { c.inner_loops = get_as<std::size_t>(v, "inner_loops"); };
    t["threshold"] = [](AttackConfig& c, const json& v) { c.threshold = get_as<float>(v, "threshold"); };
    t["momentum"] = [](AttackConfig& c, const json& v) { c.momentum = get_as<float>(v, "momentum"); };
    t["lambda1"] = [](AttackConfig& c, const json& v) { c.lambda1 = get_as<double>(v, "lambda1"); };
    t["lambda2"] = [](AttackConfig& c, const json& v) { c.lambda2 = get_as<double>(v, "lambda2"); };
    t["beta"] = [](AttackConfig& c, const json& v) { c.beta = get_as<float>(v, "beta"); };
    t["fill_mode"] = [](AttackConfig& c, const json& v) {
      c.fill_mode = attention::fill_mode_from_string(get_as<std::string>(v, "fill_mode"));
    };
    t["di_prob"] = [](AttackConfig& c, const json& v) { c.di_prob = get_as<double>(v, "di_prob"); };
    t["di_scale"] = [](AttackConfig& c, const json& v) { c.di_scale = get_as<double>(v, "di_scale"); };
    t["ti_kernel"] = [](AttackConfig& c, const json& v) { c.ti_kernel = get_as<std::size_t>(v, "ti_kernel"); };
    t["ensemble_mode"] = [](AttackConfig& c, const json& v) {
      c.ensemble_mode = ensemble_mode_from_string(get_as<std::string>(v, "ensemble_mode"));
    };
    t["drop_meta_train"] = [](AttackConfig& c, const json& v) { c.drop_meta_train = get_as<bool>(v, "drop_meta_train"); };
    t["drop_meta_test"] = [](AttackConfig& c, const json& v) { c.drop_meta_test = get_as<bool>(v, "drop_meta_test"); };
    t["drop_gso"] = [](AttackConfig& c, const json& v) { c.drop_gso = get_as<bool>(v, "drop_gso"); };
    t["extracted_area"] = [](AttackConfig& c, const json& v) {
      c.extracted_area = extracted_area_from_string(get_as<std::string>(v, "extracted_area"));
    };
    t["selection_strategy"] = [](AttackConfig& c, const json& v) {
      c.selection_strategy = selection_strategy_from_string(get_as<std::string>(v, "selection_strategy"));
    };
    t["seed"] = [](AttackConfig& c, const json& v) { c.seed = get_as<std::uint64_t>(v, "seed"); };
    t["surrogates"] = [](AttackConfig& c, const json& v) {
      c.surrogates = get_as<std::vector<std::string>>(v, "surrogates");
    };
    t["targets"] = [](AttackConfig& c, const json& v) { c.targets = get_as<std::vector<std::string>>(v, "targets"); };
    t["registry"] = [](AttackConfig& c, const json& v) { c.registry = get_as<std::string>(v, "registry"); };
    t["dataset"] = [](AttackConfig& c, const json& v) { c.dataset = get_as<std::string>(v, "dataset"); };
    t["per_class"] = [](AttackConfig& c, const json& v) { c.per_class = get_as<std::size_t>(v, "per_class"); };
    t["batch_size"] = [](AttackConfig& c, const json& v) { c.batch_size = get_as<std::size_t>(v, "batch_size"); };
    return t;
  }();
  return table;
}

}  // namespace

AttackConfig config_from_json(const json& j) {
  AttackConfig cfg;
  if (j.is_null()) return cfg;
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown key", key);
    it->second(cfg, value);
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const AttackConfig& c) {
  return json{{"method", std::string(to_string(c.method))},
              {"base_attack", std::string(to_string(c.base_attack))},
              {"epsilon", c.epsilon},
              {"step_size", c.step_size},
              {"outer_iters", c.outer_iters},
              {"inner_loops", c.inner_loops},
              {"threshold", c.threshold},
              {"momentum", c.momentum},
              {"lambda1", c.lambda1},
              {"lambda2", c.lambda2},
              {"beta", c.beta},
              {"fill_mode", std::string(attention::to_string(c.fill_mode))},
              {"di_prob", c.di_prob},
              {"di_scale", c.di_scale},
              {"ti_kernel", c.ti_kernel},
              {"ensemble_mode", std::string(to_string(c.ensemble_mode))},
              {"drop_meta_train", c.drop_meta_train},
              {"drop_meta_test", c.drop_meta_test},
              {"drop_gso", c.drop_gso},
              {"extracted_area", std::string(to_string(c.extracted_area))},
              {"selection_strategy", std::string(to_string(c.selection_strategy))},
              {"seed", c.seed},
              {"surrogates", c.surrogates},
              {"targets", c.targets},
              {"registry", c.registry},
              {"dataset", c.dataset},
              {"per_class", c.per_class},
              {"batch_size", c.batch_size}};
}

AttackConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string(), "config");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return config_from_json(json());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), "config");
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const AttackConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string(), "config");
  os << config_to_json(cfg).dump(2) << "\n";
}

std::string config_hash(const AttackConfig& cfg) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(fnv1a64(config_to_json(cfg).dump()) & 0xffffffffu));
  return buf;
}

}  // namespace namea::cli
