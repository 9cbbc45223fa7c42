#include "namea/batch.hpp"

namespace namea {

ImageBatch ImageBatch::slice(std::size_t begin, std::size_t count) const {
  ImageBatch out;
  out.images = images.slice(begin, count);
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
  if (tags.size() == labels.size()) {
    out.tags.assign(tags.begin() + static_cast<std::ptrdiff_t>(begin), tags.begin() + static_cast<std::ptrdiff_t>(begin + count));
  }
  return out;
}

}  // namespace namea
