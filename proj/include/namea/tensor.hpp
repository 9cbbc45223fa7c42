#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace namea {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float tensor. Images are NCHW, token sequences NTD.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Leading-axis slice, e.g. one image of a batch.
  std::size_t item_size() const;
  std::span<float> item(std::size_t index);
  std::span<const float> item(std::size_t index) const;

  void reshape(Shape shape);
  Tensor reshaped(Shape shape) const;
  void fill(float value);
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;

  /// Copies items `begin..begin+count` of the leading axis.
  Tensor slice(std::size_t begin, std::size_t count) const;

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Stacks equal-shaped tensors along a new leading axis (or concatenates
/// along axis 0 when `concat` is set).
Tensor stack(std::span<const Tensor> parts, bool concat = false);

float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace namea
