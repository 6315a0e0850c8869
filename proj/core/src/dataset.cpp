#include "mmft/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "mmft/errors.hpp"
#include "mmft/image_io.hpp"

namespace mmft {

namespace fs = std::filesystem;

std::vector<DatasetEntry> scan_dataset(const fs::path& dir) {
  const fs::path rgb_dir = dir / "rgb";
  if (!fs::is_directory(rgb_dir)) throw IoError("dataset has no rgb/ directory: " + dir.string());
  std::vector<DatasetEntry> entries;
  for (const auto& item : fs::directory_iterator(rgb_dir)) {
    if (!item.is_regular_file() || item.path().extension() != ".ppm") continue;
    DatasetEntry e;
    e.stem = item.path().stem().string();
    e.rgb = item.path();
    const fs::path depth = dir / "depth" / (e.stem + ".pgm");
    const fs::path gt = dir / "gt" / (e.stem + ".pgm");
    if (fs::exists(depth)) e.depth = depth;
    if (fs::exists(gt)) e.gt = gt;
    entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.stem < b.stem; });
  if (entries.empty()) throw IoError("dataset is empty: " + dir.string());
  return entries;
}

std::pair<Tensor, Tensor> normalize_depth(const Tensor& raw) {
  const auto v = raw.values();
  Real lo = 0, hi = 0;
  bool any = false;
  for (Real x : v) {
    if (x <= 0) continue;
    lo = any ? std::min(lo, x) : x;
    hi = any ? std::max(hi, x) : x;
    any = true;
  }
  std::vector<Real> depth(v.size(), 0.0), valid(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] <= 0) continue;
    valid[i] = 1.0;
    depth[i] = hi > lo ? (v[i] - lo) / (hi - lo) : 0.0;
  }
  return {Tensor(raw.shape(), std::move(depth)), Tensor(raw.shape(), std::move(valid))};
}

Sample load_sample(const DatasetEntry& entry, const MorphConfig& morph) {
  Sample s;
  s.id = entry.stem;
  s.rgb = load_image(entry.rgb);
  if (s.rgb.dim(0) != 3) throw IoError(entry.rgb.string() + ": expected a colour (P6) image");
  const Shape map_shape{1, s.rgb.dim(1), s.rgb.dim(2)};
  if (!entry.gt) throw IoError("missing ground-truth mask for " + entry.stem);
  const Tensor gt = load_image(*entry.gt);
  if (gt.shape() != map_shape) throw IoError(entry.gt->string() + ": size differs from the rgb image");
  std::vector<Real> mask(gt.values().size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = gt.values()[i] > 127.0 / 255.0 ? 1.0 : 0.0;
  s.saliency = Tensor(map_shape, std::move(mask));
  s.contour = contour_from_saliency(s.saliency, morph);
  if (entry.depth) {
    const Tensor raw = load_image(*entry.depth);
    if (raw.shape() != map_shape) throw IoError(entry.depth->string() + ": size differs from the rgb image");
    std::tie(s.depth, s.valid) = normalize_depth(raw);
    s.has_depth = true;
  } else {
    s.depth = Tensor(map_shape, 0.0);
    s.valid = Tensor(map_shape, 0.0);
    s.has_depth = false;
  }
  return s;
}

std::vector<Sample> load_dataset(const fs::path& dir, std::int64_t size, const MorphConfig& morph) {
  std::vector<Sample> samples;
  for (const auto& entry : scan_dataset(dir)) samples.push_back(resize_sample(load_sample(entry, morph), size, morph));
  return samples;
}

void write_sample(const Sample& sample, const fs::path& dir, const std::string& stem) {
  for (const char* sub : {"rgb", "depth", "gt"}) {
    std::error_code ec;
    fs::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  save_image(sample.rgb, dir / "rgb" / (stem + ".ppm"));
  save_image(sample.saliency, dir / "gt" / (stem + ".pgm"));
  if (sample.has_depth) {
    std::vector<Real> raw(sample.depth.values().size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = sample.valid.values()[i] > 0 ? (1.0 + std::round(sample.depth.values()[i] * 254.0)) / 255.0 : 0.0;
    }
    save_image(Tensor(sample.depth.shape(), std::move(raw)), dir / "depth" / (stem + ".pgm"));
  }
}

}  // namespace mmft
