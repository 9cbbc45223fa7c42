#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "namea/tensor.hpp"

namespace namea::nn {

struct Param {
  std::string name;
  Tensor value;
};

/// Rewrites the backward signal arriving at a named site in place.
using BackwardHook = std::function<void(std::string_view site, Tensor& grad)>;

/// State of one forward/backward pass: the tape of saved activations,
/// optional parameter-gradient accumulators, and site hooks. A network is
/// never mutated by a pass, so independent passes can share it.
class PassContext {
 public:
  explicit PassContext(bool want_param_grads = false) : want_param_grads_(want_param_grads) {}

  void save(std::vector<Tensor> frame) { tape_.push_back(std::move(frame)); }
  std::vector<Tensor> restore();

  bool wants_param_grads() const noexcept { return want_param_grads_; }
  /// Accumulator for `p`, zero-initialised on first use.
  Tensor& param_grad(const Param& p);
  const std::unordered_map<const Param*, Tensor>& param_grads() const noexcept { return param_grads_; }

  /// Records the forward value and the backward signal (after hooks) at `site`.
  void capture(std::string site) { capture_site_ = std::move(site); }
  void set_backward_hook(BackwardHook hook) { hook_ = std::move(hook); }

  void forward_site(std::string_view site, const Tensor& value);
  void backward_site(std::string_view site, Tensor& grad);

  bool has_capture() const noexcept { return !captured_value_.empty(); }
  const Tensor& captured_value() const noexcept { return captured_value_; }
  const Tensor& captured_grad() const noexcept { return captured_grad_; }

 private:
  bool want_param_grads_;
  std::vector<std::vector<Tensor>> tape_;
  std::unordered_map<const Param*, Tensor> param_grads_;
  std::string capture_site_;
  Tensor captured_value_, captured_grad_;
  BackwardHook hook_;
};

}  // namespace namea::nn
