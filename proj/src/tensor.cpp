#include "namea/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "namea/errors.hpp"

namespace namea {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_numel(shape_)) {
    throw UsageError("tensor: " + std::to_string(data_.size()) + " values for shape " + shape_str(shape_));
  }
}

std::size_t Tensor::item_size() const {
  if (shape_.empty() || shape_[0] == 0) return 0;
  return data_.size() / shape_[0];
}

std::span<float> Tensor::item(std::size_t index) {
  const std::size_t n = item_size();
  return std::span<float>(data_).subspan(index * n, n);
}

std::span<const float> Tensor::item(std::size_t index) const {
  const std::size_t n = item_size();
  return std::span<const float>(data_).subspan(index * n, n);
}

void Tensor::reshape(Shape shape) {
  if (shape_numel(shape) != data_.size()) {
    throw UsageError("reshape " + shape_str(shape_) + " -> " + shape_str(shape));
  }
  shape_ = std::move(shape);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t = *this;
  t.reshape(std::move(shape));
  return t;
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor Tensor::slice(std::size_t begin, std::size_t count) const {
  if (shape_.empty() || begin + count > shape_[0]) throw UsageError("slice out of range");
  Shape s = shape_;
  s[0] = count;
  const std::size_t n = item_size();
  std::vector<float> v(data_.begin() + static_cast<std::ptrdiff_t>(begin * n),
                       data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  return Tensor(std::move(s), std::move(v));
}

Tensor stack(std::span<const Tensor> parts, bool concat) {
  if (parts.empty()) throw UsageError("stack of zero tensors");
  const Shape& base = parts.front().shape();
  Shape out;
  std::size_t lead = 0;
  for (const auto& p : parts) {
    if (concat) {
      if (p.rank() != base.size() || !std::equal(base.begin() + 1, base.end(), p.shape().begin() + 1)) {
        throw UsageError("concat shape mismatch");
      }
      lead += p.dim(0);
    } else if (p.shape() != base) {
      throw UsageError("stack shape mismatch");
    }
  }
  if (concat) {
    out = base;
    out[0] = lead;
  } else {
    out.push_back(parts.size());
    out.insert(out.end(), base.begin(), base.end());
  }
  std::vector<float> v;
  v.reserve(shape_numel(out));
  for (const auto& p : parts) v.insert(v.end(), p.values().begin(), p.values().end());
  return Tensor(std::move(out), std::move(v));
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw UsageError("max_abs_diff size mismatch");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace namea
