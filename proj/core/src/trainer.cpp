#include "mmft/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "mmft/errors.hpp"
#include "mmft/image_io.hpp"
#include "mmft/ops.hpp"

namespace mmft {

void TrainConfig::validate() const {
  if (input_size < 32 || input_size % 32 != 0) throw ValidationError("train: input_size must be a multiple of 32");
  if (batch < 1 || epochs < 1 || decay_step < 1) throw ValidationError("train: batch, epochs and decay_step must be positive");
  if (!(lr > 0) || !(decay_rate > 0)) throw ValidationError("train: lr and decay_rate must be positive");
  if (steps < 0 || checkpoint_every < 0) throw ValidationError("train: steps and checkpoint_every must be >= 0");
  adam.validate();
  augmentation.validate();
}

std::int64_t TrainConfig::steps_per_epoch(std::size_t n) const {
  if (n == 0) throw ValidationError("train: dataset is empty");
  const auto b = std::min<std::int64_t>(batch, static_cast<std::int64_t>(n));
  return (static_cast<std::int64_t>(n) + b - 1) / b;
}

std::int64_t TrainConfig::total_steps(std::size_t n) const {
  return steps > 0 ? steps : epochs * steps_per_epoch(n);
}

std::uint64_t step_seed(std::uint64_t seed, std::int64_t step, std::size_t slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(slot)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<std::size_t> batch_indices(std::size_t n, const TrainConfig& config, std::int64_t step) {
  const auto per_epoch = config.steps_per_epoch(n);
  const auto b = static_cast<std::size_t>(std::min<std::int64_t>(config.batch, static_cast<std::int64_t>(n)));
  const std::int64_t epoch = (step - 1) / per_epoch;
  const auto slot = static_cast<std::size_t>((step - 1) % per_epoch);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(step_seed(config.seed, -1 - epoch, 0));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> out;
  for (std::size_t i = slot * b; i < std::min(n, (slot + 1) * b); ++i) out.push_back(perm[i]);
  return out;
}

StepLog train_step(Model& model, Adam& optimizer, const std::vector<Sample>& data, const TrainConfig& config,
                   const LossConfig& loss) {
  const std::int64_t step = optimizer.steps() + 1;
  const auto per_epoch = config.steps_per_epoch(data.size());
  StepLog log;
  log.step = step;
  log.epoch = (step - 1) / per_epoch;
  log.lr = lr_schedule(log.epoch, config.lr, config.decay_step, config.decay_rate);

  const auto indices = batch_indices(data.size(), config, step);
  const Real inv = 1.0 / static_cast<Real>(indices.size());
  model.parameters().zero_grad();
  for (std::size_t slot = 0; slot < indices.size(); ++slot) {
    const Sample& raw = data[indices[slot]];
    Sample s;
    try {
      if (config.augment) {
        Rng rng(step_seed(config.seed, step, slot));
        s = augment(raw, config.augmentation, rng);
      } else {
        s = raw;
      }
      if (s.height() != config.input_size || s.width() != config.input_size) s = resize_sample(s, config.input_size);
      const DecodeResult out = model.forward(s.rgb);
      const LossReport r = total_loss(out.side, s, loss);
      scale(r.total, inv).backward();
      log.total += r.total_value * inv;
      log.depth += r.depth * inv;
      log.saliency += r.saliency * inv;
      log.contour += r.contour * inv;
    } catch (const ValidationError& e) {
      throw ValidationError("sample '" + raw.id + "': " + e.what());
    } catch (const NumericError& e) {
      throw NumericError("sample '" + raw.id + "': " + e.what());
    }
  }
  optimizer.step(model.parameters(), log.lr);
  return log;
}

namespace {

void append_log(const std::filesystem::path& path, const StepLog& l) {
  const bool fresh = !std::filesystem::exists(path);
  std::FILE* f = std::fopen(path.c_str(), "a");
  if (!f) throw IoError("cannot append to " + path.string());
  if (fresh) std::fprintf(f, "step,epoch,lr,total,depth,saliency,contour\n");
  std::fprintf(f, "%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(l.step),
               static_cast<long long>(l.epoch), l.lr, l.total, l.depth, l.saliency, l.contour);
  std::fclose(f);
}

}  // namespace

std::vector<StepLog> train(Model& model, Adam& optimizer, const std::vector<Sample>& data, const TrainConfig& config,
                           const LossConfig& loss, const TrainOptions& options) {
  config.validate();
  loss.validate();
  if (data.empty()) throw ValidationError("train: no samples");
  if (config.input_size != model.config().input_size) {
    throw ValidationError("train: input_size " + std::to_string(config.input_size) + " differs from the model's " +
                          std::to_string(model.config().input_size));
  }
  const bool write = !options.out_dir.empty();
  if (write) std::filesystem::create_directories(options.out_dir);
  std::int64_t end = config.total_steps(data.size());
  if (options.stop_after >= 0) end = std::min(end, options.stop_after);

  std::vector<StepLog> logs;
  while (optimizer.steps() < end) {
    const StepLog l = train_step(model, optimizer, data, config, loss);
    logs.push_back(l);
    if (write) {
      append_log(options.out_dir / "loss_log.csv", l);
      if (config.checkpoint_every > 0 && l.step % config.checkpoint_every == 0) {
        write_checkpoint(make_checkpoint(model, &optimizer),
                         options.out_dir / ("checkpoint_step" + std::to_string(l.step) + ".mmft"));
      }
    }
    if (options.on_step) options.on_step(l);
  }
  if (write) write_checkpoint(make_checkpoint(model, &optimizer), options.out_dir / "final.mmft");
  return logs;
}

std::vector<Sample> synthetic_dataset(std::size_t n, std::int64_t size, std::uint64_t seed, int n_shapes) {
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s = generate_synthetic(seed + i, size, size, n_shapes);
    s.id = "synthetic_" + std::to_string(seed + i);
    out.push_back(std::move(s));
  }
  return out;
}

Prediction predict(const Model& model, const Tensor& rgb) {
  NoGradGuard guard;
  if (rgb.rank() != 3 || rgb.dim(0) != 3) throw ValidationError("predict: expected a [3,H,W] image, got " + shape_str(rgb.shape()));
  const auto size = model.config().input_size;
  const Tensor input = (rgb.dim(1) == size && rgb.dim(2) == size) ? rgb.detach() : resize_bilinear(rgb.detach(), size, size);
  const DecodeResult r = model.forward(input);
  Prediction p;
  for (std::size_t i = 0; i < kNumTasks; ++i) p[i] = r.prediction[i].detach();
  return p;
}

void predict_to_dir(const Model& model, const std::filesystem::path& image, const std::filesystem::path& out_dir) {
  const Tensor rgb = load_image(image);
  if (rgb.dim(0) != 3) throw ValidationError("predict: " + image.string() + " is not a colour image");
  const Prediction p = predict(model, rgb);
  std::filesystem::create_directories(out_dir);
  for (Task t : kTasks) save_image(p[static_cast<std::size_t>(t)], out_dir / (std::string(task_name(t)) + ".pgm"));
}

EvalResult evaluate_predictions(const std::vector<Sample>& samples, const std::vector<Prediction>& predictions) {
  if (samples.empty()) throw ValidationError("evaluate: dataset is empty");
  if (samples.size() != predictions.size()) throw ValidationError("evaluate: prediction count differs from sample count");
  EvalResult result;
  std::map<std::string, std::pair<Real, int>> sums;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const Prediction& p = predictions[i];
    ImageEval e;
    e.id = s.id;
    e.metrics = saliency_metrics(p[static_cast<std::size_t>(Task::Saliency)], s.saliency);
    const Tensor& contour = p[static_cast<std::size_t>(Task::Contour)];
    e.metrics.set("contour_mae", mae(contour, s.contour));
    bool has_contour = false;
    for (Real v : s.contour.values()) has_contour |= v > 0.5;
    if (has_contour) e.metrics.set("contour_f_max", f_beta_max(contour, s.contour));
    if (s.has_depth) e.metrics.merge(depth_metrics(p[static_cast<std::size_t>(Task::Depth)], s.depth, s.valid));
    for (const auto& [k, v] : e.metrics.values) {
      sums[k].first += v;
      sums[k].second += 1;
    }
    result.images.push_back(std::move(e));
  }
  for (const auto& [k, acc] : sums) result.mean.set(k, acc.first / acc.second);
  return result;
}

EvalResult evaluate(const Model& model, const std::vector<Sample>& samples) {
  std::vector<Prediction> preds;
  preds.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.height() != model.config().input_size || s.width() != model.config().input_size) {
      throw ValidationError("evaluate: sample '" + s.id + "' is not at the model input size");
    }
    preds.push_back(predict(model, s.rgb));
  }
  return evaluate_predictions(samples, preds);
}

void write_report(const EvalResult& result, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot write report " + path.string());
  std::fprintf(f, "images=%zu\n", result.images.size());
  std::fprintf(f, "e_measure_mode=max\n");
  std::fprintf(f, "f_max_mode=max\n");
  for (const auto& [k, v] : result.mean.values) std::fprintf(f, "%s=%.17g\n", k.c_str(), v);
  std::fclose(f);

  std::set<std::string> keys;
  for (const auto& img : result.images) {
    for (const auto& [k, v] : img.metrics.values) keys.insert(k);
  }
  const auto csv = path.string() + ".csv";
  f = std::fopen(csv.c_str(), "w");
  if (!f) throw IoError("cannot write report " + csv);
  std::fprintf(f, "id");
  for (const auto& k : keys) std::fprintf(f, ",%s", k.c_str());
  std::fprintf(f, "\n");
  for (const auto& img : result.images) {
    std::fprintf(f, "%s", img.id.c_str());
    for (const auto& k : keys) {
      const auto v = img.metrics.get(k);
      if (v) std::fprintf(f, ",%.17g", *v);
      else std::fprintf(f, ",");
    }
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

}  // namespace mmft
