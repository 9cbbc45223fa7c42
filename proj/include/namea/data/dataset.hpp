#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "namea/batch.hpp"

namespace namea::data {

/// Procedural 10-class 3x32x32 image set. The class is the two-tone texture
/// inside one large object (stripes at four angles, checks, dots, diamonds,
/// zigzag, solid, grid lines); shape, colours, position, size,
/// background, noise and small solid distractors vary freely.
struct SynthOptions {
  std::size_t image_size = 32;
  float noise = 0.04f;
  std::size_t max_distractors = 2;
  double min_radius = 0.22, max_radius = 0.35;  // object radius, fraction of the side
  double min_period = 2.5, max_period = 4.0;    // stripe period in pixels
};

constexpr std::size_t kSynthClasses = 10;

/// `per_class` images of every class, interleaved by class. Deterministic in
/// (seed, per_class, options).
ImageBatch generate_synthetic(std::size_t per_class, std::uint64_t seed, const SynthOptions& options = {});

/// One labelled file of a class-per-subdirectory image set. Subdirectories
/// sorted by name define the label order.
struct DatasetEntry {
  std::filesystem::path path;
  int label = 0;
};

struct DatasetIndex {
  std::vector<std::string> class_names;
  std::vector<std::vector<DatasetEntry>> by_class;
};

DatasetIndex index_dataset(const std::filesystem::path& root);
/// Loads the listed files as one batch; tags are the file stems.
ImageBatch load_entries(const std::vector<DatasetEntry>& entries);

/// Writes `class_<k>/<index>.png` under `root`.
void write_dataset(const std::filesystem::path& root, const ImageBatch& batch);

/// Dataset root: the NAMEA_DATA_ROOT environment variable, else `fallback`.
std::filesystem::path data_root(const std::filesystem::path& fallback = "data");

}  // namespace namea::data
