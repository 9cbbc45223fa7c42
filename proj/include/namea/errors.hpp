#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace namea {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration. `key()` names the offending field
/// when one is known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg, std::string key = {})
      : Error(key.empty() ? msg : key + ": " + msg), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// API misuse: mismatched sizes, double attach and similar.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Non-finite logits or gradients coming out of a model.
class ModelFault : public Error {
 public:
  ModelFault(std::string model_id, const std::string& what)
      : Error("model '" + model_id + "': " + what), model_id_(std::move(model_id)) {}
  const std::string& model_id() const noexcept { return model_id_; }

 private:
  std::string model_id_;
};

}  // namespace namea
