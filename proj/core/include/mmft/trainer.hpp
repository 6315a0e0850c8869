#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mmft/checkpoint.hpp"
#include "mmft/losses.hpp"
#include "mmft/metrics.hpp"
#include "mmft/model.hpp"
#include "mmft/optim.hpp"
#include "mmft/sample.hpp"

namespace mmft {

struct TrainConfig {
  std::int64_t input_size = 352;
  std::int64_t batch = 12;
  std::int64_t epochs = 50;
  Real lr = 1e-4;
  std::int64_t decay_step = 30;
  Real decay_rate = 0.9;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// Total optimizer steps; 0 means epochs * steps_per_epoch.
  std::int64_t steps = 0;
  bool augment = true;
  AugmentConfig augmentation;
  /// Write a numbered checkpoint every this many steps; 0 disables.
  std::int64_t checkpoint_every = 0;

  void validate() const;
  /// Batches per epoch for a dataset of n samples (the batch is capped at n).
  std::int64_t steps_per_epoch(std::size_t n) const;
  std::int64_t total_steps(std::size_t n) const;
};

struct StepLog {
  std::int64_t step = 0;  // 1-based
  std::int64_t epoch = 0;
  Real lr = 0;
  Real total = 0;
  Real depth = 0;
  Real saliency = 0;
  Real contour = 0;
};

struct TrainOptions {
  /// Receives loss_log.csv, numbered checkpoints and final.mmft. Empty: no files.
  std::filesystem::path out_dir;
  /// Stop once this many steps have completed in total (<0: run to the end).
  std::int64_t stop_after = -1;
  std::function<void(const StepLog&)> on_step;
};

/// Sample indices of one step's batch. Each epoch uses a fresh permutation
/// derived from (seed, epoch), so any step can be recomputed after a resume.
std::vector<std::size_t> batch_indices(std::size_t n, const TrainConfig& config, std::int64_t step);

/// Seed for everything random inside one step, derived from (seed, step, slot).
std::uint64_t step_seed(std::uint64_t seed, std::int64_t step, std::size_t slot);

/// One optimizer update over the batch of step `optimizer.steps() + 1`.
StepLog train_step(Model& model, Adam& optimizer, const std::vector<Sample>& data, const TrainConfig& config,
                   const LossConfig& loss = {});

/// Runs from optimizer.steps() to the configured total. Resume by loading a
/// checkpoint into the model and optimizer first.
std::vector<StepLog> train(Model& model, Adam& optimizer, const std::vector<Sample>& data, const TrainConfig& config,
                           const LossConfig& loss = {}, const TrainOptions& options = {});

/// n synthetic samples at size x size, sample i seeded with seed + i.
std::vector<Sample> synthetic_dataset(std::size_t n, std::int64_t size, std::uint64_t seed, int n_shapes = 3);

/// Per-task maps at [1,S,S], indexed by Task.
using Prediction = std::array<Tensor, kNumTasks>;

/// Depth-free inference: only rgb is read. rgb of any size is resized to the model input.
Prediction predict(const Model& model, const Tensor& rgb);

/// Loads an image, predicts and writes saliency.pgm, depth.pgm and contour.pgm.
void predict_to_dir(const Model& model, const std::filesystem::path& image, const std::filesystem::path& out_dir);

struct ImageEval {
  std::string id;
  MetricReport metrics;
};

struct EvalResult {
  std::vector<ImageEval> images;
  /// Per-key mean over the images that report the key.
  MetricReport mean;
};

/// Metrics of given predictions against samples. Depth metrics are skipped for
/// samples without depth.
EvalResult evaluate_predictions(const std::vector<Sample>& samples, const std::vector<Prediction>& predictions);
EvalResult evaluate(const Model& model, const std::vector<Sample>& samples);

/// key=value report (means, count, e_measure_mode) at `path` and one CSV row per
/// image at `path` + ".csv".
void write_report(const EvalResult& result, const std::filesystem::path& path);

}  // namespace mmft
