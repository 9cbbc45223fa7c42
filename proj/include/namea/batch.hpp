#pragma once

#include <string>
#include <vector>

#include "namea/tensor.hpp"

namespace namea {

/// Images [N,C,H,W] with intensities in [0,1] and one class label each.
struct ImageBatch {
  Tensor images;
  std::vector<int> labels;
  std::vector<std::string> tags;  // provenance, e.g. source file; may be empty

  std::size_t size() const { return labels.size(); }
  ImageBatch slice(std::size_t begin, std::size_t count) const;
};

}  // namespace namea
