#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "mmft/tensor.hpp"

namespace mmft {

enum class Task : std::size_t { Depth = 0, Saliency = 1, Contour = 2 };
inline constexpr std::array<Task, 3> kTasks{Task::Depth, Task::Saliency, Task::Contour};
inline constexpr std::size_t kNumTasks = 3;
inline constexpr std::size_t kNumLevels = 5;

constexpr std::string_view task_name(Task t) {
  switch (t) {
    case Task::Depth: return "depth";
    case Task::Saliency: return "saliency";
    case Task::Contour: return "contour";
  }
  return "?";
}

/// Per-task feature maps at one decoder level, each [C,H,W] with one shared shape.
struct FeatureTriple {
  std::array<Tensor, kNumTasks> maps;

  Tensor& operator[](Task t) { return maps[static_cast<std::size_t>(t)]; }
  const Tensor& operator[](Task t) const { return maps[static_cast<std::size_t>(t)]; }
  const Shape& shape() const { return maps[0].shape(); }
  /// Throws ShapeError unless all three maps exist and share one [C,H,W] shape.
  void validate() const;
};

/// Five encoder levels; level i (0-based) has stride 2^(i+1).
struct FeaturePyramid {
  std::array<Tensor, kNumLevels> levels;
};

/// Full-resolution per-level, per-task predictions in (0,1). Index [level][task]
/// with level 0 the finest (stride 2) decoder block.
struct SideOutputs {
  std::array<std::array<Tensor, kNumTasks>, kNumLevels> maps;

  Tensor& at(std::size_t level, Task t) { return maps[level][static_cast<std::size_t>(t)]; }
  const Tensor& at(std::size_t level, Task t) const { return maps[level][static_cast<std::size_t>(t)]; }
};

}  // namespace mmft
