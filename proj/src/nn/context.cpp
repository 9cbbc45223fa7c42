#include "namea/nn/context.hpp"

#include "namea/errors.hpp"

namespace namea::nn {

std::vector<Tensor> PassContext::restore() {
  if (tape_.empty()) throw UsageError("backward pass without matching forward frame");
  std::vector<Tensor> frame = std::move(tape_.back());
  tape_.pop_back();
  return frame;
}

Tensor& PassContext::param_grad(const Param& p) {
  auto it = param_grads_.find(&p);
  if (it == param_grads_.end()) it = param_grads_.emplace(&p, Tensor::zeros_like(p.value)).first;
  return it->second;
}

void PassContext::forward_site(std::string_view site, const Tensor& value) {
  if (!capture_site_.empty() && site == capture_site_) captured_value_ = value;
}

void PassContext::backward_site(std::string_view site, Tensor& grad) {
  if (hook_) hook_(site, grad);
  if (!capture_site_.empty() && site == capture_site_) captured_grad_ = grad;
}

}  // namespace namea::nn
