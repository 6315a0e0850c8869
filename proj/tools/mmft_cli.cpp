// Command-line front end: train, eval, predict, gradcheck, gen-data, contour-gt.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mmft/checkpoint.hpp"
#include "mmft/dataset.hpp"
#include "mmft/diagnostics.hpp"
#include "mmft/errors.hpp"
#include "mmft/image_io.hpp"
#include "mmft/morphology.hpp"
#include "mmft/trainer.hpp"

namespace fs = std::filesystem;
using namespace mmft;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

struct TrainArgs {
  std::string data;
  int synthetic = 0;
  std::string out;
  std::string resume;
  std::string preset = "full";
  std::string fusion = "mft";
  int layers = 6;
  int shapes = 3;
  TrainConfig cfg;
};

ModelConfig model_config(const TrainArgs& a) {
  ModelConfig mc = a.preset == "reduced" ? ModelConfig::reduced(a.cfg.input_size) : ModelConfig{};
  if (a.preset != "reduced" && a.preset != "full") throw ValidationError("--preset must be full or reduced");
  mc.input_size = a.cfg.input_size;
  mc.fusion = parse_fusion(a.fusion);
  mc.mft.layers = a.layers;
  mc.seed = a.cfg.seed;
  mc.finalize();
  return mc;
}

int run_train(const TrainArgs& a) {
  if (a.data.empty() == (a.synthetic == 0)) throw ValidationError("train: give exactly one of --data or --synthetic");
  std::vector<Sample> data = a.data.empty()
                                 ? synthetic_dataset(static_cast<std::size_t>(a.synthetic), a.cfg.input_size, a.cfg.seed,
                                                     a.shapes)
                                 : load_dataset(a.data, a.cfg.input_size);
  std::unique_ptr<Model> model;
  std::optional<Checkpoint> resumed;
  if (!a.resume.empty()) {
    resumed = read_checkpoint(a.resume);
    model = std::make_unique<Model>(model_config_from(*resumed));
    load_parameters(*model, *resumed);
  } else {
    model = std::make_unique<Model>(model_config(a));
  }
  Adam optimizer(model->parameters(), a.cfg.adam);
  if (resumed && !load_optimizer(optimizer, *model, *resumed)) {
    throw ValidationError("train: checkpoint " + a.resume + " has no optimizer state to resume from");
  }
  TrainOptions opts;
  opts.out_dir = a.out;
  const auto total = a.cfg.total_steps(data.size());
  const auto t0 = std::chrono::steady_clock::now();
  opts.on_step = [&](const StepLog& l) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("step %lld/%lld epoch %lld lr %.3g loss %.6f (depth %.5f saliency %.5f contour %.5f) %.1fs\n",
                static_cast<long long>(l.step), static_cast<long long>(total), static_cast<long long>(l.epoch), l.lr,
                l.total, l.depth, l.saliency, l.contour, s);
    std::fflush(stdout);
  };
  std::printf("model: %lld parameters, fusion %s, %zu samples\n",
              static_cast<long long>(model->parameters().scalar_count()),
              std::string(fusion_name(model->config().fusion)).c_str(), data.size());
  train(*model, optimizer, data, a.cfg, LossConfig{}, opts);
  std::printf("wrote %s\n", (fs::path(a.out) / "final.mmft").string().c_str());
  return 0;
}

std::unique_ptr<Model> load_model(const std::string& path) {
  const Checkpoint c = read_checkpoint(path);
  auto model = std::make_unique<Model>(model_config_from(c));
  load_parameters(*model, c);
  return model;
}

int run_eval(const std::string& ckpt, const std::string& data, const std::string& report) {
  const auto model = load_model(ckpt);
  const auto samples = load_dataset(data, model->config().input_size);
  const EvalResult r = evaluate(*model, samples);
  write_report(r, report);
  for (const auto& [k, v] : r.mean.values) std::printf("%s=%.6f\n", k.c_str(), v);
  std::printf("wrote %s and %s.csv\n", report.c_str(), report.c_str());
  return 0;
}

int run_predict(const std::string& ckpt, const std::string& image, const std::string& out) {
  const auto model = load_model(ckpt);
  predict_to_dir(*model, image, out);
  std::printf("wrote saliency.pgm, depth.pgm, contour.pgm to %s\n", out.c_str());
  return 0;
}

int run_gradcheck_cmd(const std::string& scope, std::uint64_t seed) {
  std::vector<std::string> scopes;
  for (const auto& s : gradcheck_scopes()) {
    if (s == scope || (scope == "all") || (scope == "op" && s.rfind("op:", 0) == 0) ||
        (scope == "module" && s.rfind("module:", 0) == 0)) {
      scopes.push_back(s);
    }
  }
  if (scopes.empty()) throw ValidationError("gradcheck: unknown scope '" + scope + "'");
  bool ok = true;
  for (const auto& s : scopes) {
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckReport r = run_gradcheck(s, seed);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%-28s %s max_rel_error=%.3e coords=%lld roundoff_limited=%lld kinks=%lld time=%.2fs\n", s.c_str(),
                r.passed ? "PASS" : "FAIL", r.max_rel_error, static_cast<long long>(r.coords_checked),
                static_cast<long long>(r.roundoff_limited), static_cast<long long>(r.kinks), dt);
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitValidation;
}

int run_gen_data(const std::string& out, int count, std::uint64_t seed, std::int64_t size, int shapes) {
  if (count < 1) throw ValidationError("gen-data: --count must be positive");
  const auto samples = synthetic_dataset(static_cast<std::size_t>(count), size, seed, shapes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%05zu", i);
    write_sample(samples[i], out, stem);
  }
  std::printf("wrote %d samples to %s\n", count, out.c_str());
  return 0;
}

int run_contour_gt(const std::string& in, const std::string& out, int m) {
  const MorphConfig cfg{m};
  cfg.validate();
  const Tensor raw = load_image(in);
  if (raw.dim(0) != 1) throw ValidationError("contour-gt: " + in + " is not a grey-scale mask");
  std::vector<Real> bin(raw.values().begin(), raw.values().end());
  for (auto& v : bin) v = v > 127.0 / 255.0 ? 1.0 : 0.0;
  save_image(contour_from_saliency(Tensor(raw.shape(), std::move(bin)), cfg), out);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task depth / saliency / contour network with a filtered transformer fusion block"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train on a dataset directory or synthetic scenes");
  train_cmd->set_config("--config", "", "Flat key = value file; command-line flags win");
  train_cmd->add_option("--data", ta.data, "Dataset directory (rgb/, depth/, gt/)");
  train_cmd->add_option("--synthetic", ta.synthetic, "Generate this many synthetic samples instead");
  train_cmd->add_option("--out", ta.out, "Output directory for loss_log.csv and checkpoints")->required();
  train_cmd->add_option("--resume", ta.resume, "Continue from a checkpoint (model shape comes from the checkpoint)");
  train_cmd->add_option("--preset", ta.preset, "Network width: full or reduced")->capture_default_str();
  train_cmd->add_option("--fusion", ta.fusion, "Deepest-level fusion: mft, msf-off, conv, non-local")->capture_default_str();
  train_cmd->add_option("--layers", ta.layers, "Transformer iterations")->capture_default_str();
  train_cmd->add_option("--shapes", ta.shapes, "Shapes per synthetic scene")->capture_default_str();
  train_cmd->add_option("--input-size", ta.cfg.input_size, "Square input resolution")->capture_default_str();
  train_cmd->add_option("--batch", ta.cfg.batch, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--epochs", ta.cfg.epochs, "Epochs (ignored when --steps > 0)")->capture_default_str();
  train_cmd->add_option("--steps", ta.cfg.steps, "Total optimizer steps (0: epochs x batches)")->capture_default_str();
  train_cmd->add_option("--lr", ta.cfg.lr, "Initial learning rate")->capture_default_str();
  train_cmd->add_option("--decay-step", ta.cfg.decay_step, "Epochs between decays")->capture_default_str();
  train_cmd->add_option("--decay-rate", ta.cfg.decay_rate, "Multiplicative decay")->capture_default_str();
  train_cmd->add_option("--seed", ta.cfg.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--beta1", ta.cfg.adam.beta1)->capture_default_str();
  train_cmd->add_option("--beta2", ta.cfg.adam.beta2)->capture_default_str();
  train_cmd->add_option("--adam-eps", ta.cfg.adam.eps)->capture_default_str();
  train_cmd->add_option("--augment", ta.cfg.augment, "Random flip / rotate / border crop")->capture_default_str();
  train_cmd->add_option("--checkpoint-every", ta.cfg.checkpoint_every, "Steps between numbered checkpoints")
      ->capture_default_str();

  std::string ckpt, data, report, image, out, scope = "all", in;
  std::uint64_t seed = 0;
  int count = 8, shapes = 3, m = 3;
  std::int64_t size = 352;

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset directory");
  eval_cmd->add_option("--ckpt", ckpt)->required();
  eval_cmd->add_option("--data", data)->required();
  eval_cmd->add_option("--report", report, "key=value report; per-image rows go to <report>.csv")->required();

  auto* predict_cmd = app.add_subcommand("predict", "Predict depth, saliency and contour maps from an RGB image");
  predict_cmd->add_option("--ckpt", ckpt)->required();
  predict_cmd->add_option("--image", image, "P6 colour image")->required();
  predict_cmd->add_option("--out", out)->required();

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  grad_cmd->add_option("--scope", scope, "all, op, module, model, or a single op:<name> / module:<name>")
      ->capture_default_str();
  grad_cmd->add_option("--seed", seed)->capture_default_str();
  grad_cmd->add_flag("--list", "List available scopes");

  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset directory");
  gen_cmd->add_option("--out", out)->required();
  gen_cmd->add_option("--count", count)->capture_default_str();
  gen_cmd->add_option("--seed", seed)->capture_default_str();
  gen_cmd->add_option("--size", size)->capture_default_str();
  gen_cmd->add_option("--shapes", shapes)->capture_default_str();

  auto* contour_cmd = app.add_subcommand("contour-gt", "Contour ground truth (dilate - erode) from a saliency mask");
  contour_cmd->add_option("--in", in)->required();
  contour_cmd->add_option("--out", out)->required();
  contour_cmd->add_option("--m", m, "Square structuring element size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*train_cmd) return run_train(ta);
    if (*eval_cmd) return run_eval(ckpt, data, report);
    if (*predict_cmd) return run_predict(ckpt, image, out);
    if (*grad_cmd) {
      if (grad_cmd->count("--list")) {
        for (const auto& s : gradcheck_scopes()) std::printf("%s\n", s.c_str());
        return 0;
      }
      return run_gradcheck_cmd(scope, seed);
    }
    if (*gen_cmd) return run_gen_data(out, count, seed, size, shapes);
    if (*contour_cmd) return run_contour_gt(in, out, m);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
