#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmft/sample.hpp"

namespace mmft {

// On-disk layout:
//   DIR/rgb/<stem>.ppm     colour image (required)
//   DIR/depth/<stem>.pgm   raw depth, 0 marks a sensor hole (optional)
//   DIR/gt/<stem>.pgm      saliency mask, > 127 is foreground
// Contour ground truth is always derived from the saliency mask.

struct DatasetEntry {
  std::string stem;
  std::filesystem::path rgb;
  std::optional<std::filesystem::path> depth;
  std::optional<std::filesystem::path> gt;
};

/// Lists rgb/*.ppm in stem order and pairs each with its depth/gt files if present.
std::vector<DatasetEntry> scan_dataset(const std::filesystem::path& dir);

/// Min-max normalizes raw depth over pixels with raw > 0. Returns the
/// normalized map and the validity mask.
std::pair<Tensor, Tensor> normalize_depth(const Tensor& raw);

/// Loads one entry. Missing gt throws IoError; missing depth yields has_depth = false.
Sample load_sample(const DatasetEntry& entry, const MorphConfig& morph = {});

/// Loads and resizes every sample of a dataset directory.
std::vector<Sample> load_dataset(const std::filesystem::path& dir, std::int64_t size,
                                 const MorphConfig& morph = {});

/// Writes a sample in the dataset layout. Depth is stored as 1 + round(d * 254)
/// on valid pixels so that it survives the hole convention.
void write_sample(const Sample& sample, const std::filesystem::path& dir, const std::string& stem);

}  // namespace mmft
