#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmft/model.hpp"
#include "mmft/optim.hpp"

namespace mmft {

// Binary layout (little endian):
//   "MMFT" | u32 version | u32 record count |
//   per record: u32 name length | name bytes | u8 rank | rank x u32 dims | prod(dims) x f32
// Model parameters use their store names; Adam moments are "adam.m/<name>" and
// "adam.v/<name>"; the update counter is "meta/step"; the model configuration
// is stored as "config/<key>" records.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::vector<CheckpointRecord> records;

  const CheckpointRecord* find(const std::string& name) const;
  const CheckpointRecord& require(const std::string& name) const;
  void add(std::string name, Shape shape, std::vector<float> values);
};

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Parameters, optional optimizer state and the model configuration.
Checkpoint make_checkpoint(const Model& model, const Adam* optimizer);
ModelConfig model_config_from(const Checkpoint& checkpoint);
/// Copies parameter values into the model. Throws ValidationError on a missing
/// or misshaped record.
void load_parameters(Model& model, const Checkpoint& checkpoint);
/// Restores moments and the step counter; false when the checkpoint carries none.
bool load_optimizer(Adam& optimizer, const Model& model, const Checkpoint& checkpoint);

}  // namespace mmft
