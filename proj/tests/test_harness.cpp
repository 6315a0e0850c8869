#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "mmft/checkpoint.hpp"
#include "mmft/dataset.hpp"
#include "mmft/errors.hpp"
#include "mmft/image_io.hpp"
#include "mmft/trainer.hpp"

using namespace mmft;
using testing_util::vec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mmft_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TrainConfig small_train(std::int64_t steps) {
  TrainConfig c;
  c.input_size = 64;
  c.batch = 2;
  c.lr = 1e-3;
  c.steps = steps;
  c.seed = 5;
  return c;
}

oracle::Vec all_values(const Model& m) {
  oracle::Vec out;
  for (const auto& [name, t] : m.parameters().entries()) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

bool same_logs(const std::vector<StepLog>& a, const std::vector<StepLog>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].step != b[i].step || a[i].total != b[i].total || a[i].depth != b[i].depth ||
        a[i].saliency != b[i].saliency || a[i].contour != b[i].contour || a[i].lr != b[i].lr)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("adam update") {
  SUBCASE("first step closed form") {
    const AdamConfig cfg;
    std::vector<Real> p{0.5, -1.0, 2.0};
    const std::vector<Real> g{0.3, -2.0, 1e-3};
    AdamMoments m;
    adam_update(p, g, m, 1, 0.01, cfg);
    const std::vector<Real> expected{0.5 - 0.01 * 0.3 / (0.3 + 1e-8), -1.0 + 0.01 * 2.0 / (2.0 + 1e-8),
                                     2.0 - 0.01 * 1e-3 / (1e-3 + 1e-8)};
    for (int i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(expected[i]).epsilon(1e-14));
  }
  SUBCASE("five-step trace matches a scalar oracle") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    const AdamConfig cfg;
    std::vector<Real> p{0.2, -0.7};
    oracle::ScalarAdam o0, o1;
    double r0 = p[0], r1 = p[1];
    AdamMoments m;
    for (int t = 1; t <= 5; ++t) {
      const std::vector<Real> g{u(rng), u(rng)};
      adam_update(p, g, m, t, 1e-2, cfg);
      r0 = o0.step(r0, g[0], 1e-2);
      r1 = o1.step(r1, g[1], 1e-2);
      CHECK(p[0] == doctest::Approx(r0).epsilon(1e-13));
      CHECK(p[1] == doctest::Approx(r1).epsilon(1e-13));
    }
  }
  SUBCASE("non-finite gradients abort the whole step") {
    ParameterStore store;
    Tensor a = store.add("a", {2}, {1.0, 2.0});
    Tensor b = store.add("b", {1}, {3.0});
    Adam adam(store, {});
    a.mutable_grad()[0] = 1.0;
    b.mutable_grad()[0] = std::numeric_limits<Real>::quiet_NaN();
    CHECK_THROWS_AS(adam.step(store, 0.1), NumericError);
    CHECK(vec(a) == oracle::Vec{1.0, 2.0});
    CHECK(adam.steps() == 0);
  }
  SUBCASE("store updates land on float values") {
    ParameterStore store;
    Tensor a = store.add("a", {3}, {0.1f, 0.2f, 0.3f});
    Adam adam(store, {});
    a.mutable_grad()[0] = 0.123;
    a.mutable_grad()[2] = -0.5;
    adam.step(store, 1e-3);
    for (Real v : a.values()) CHECK(static_cast<Real>(static_cast<float>(v)) == v);
    CHECK(a.values()[1] == static_cast<Real>(0.2f));
    CHECK(adam.steps() == 1);
  }
  AdamConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("learning rate schedule") {
  CHECK(lr_schedule(0, 1e-4, 30, 0.9) == 1e-4);
  CHECK(lr_schedule(29, 1e-4, 30, 0.9) == 1e-4);
  CHECK(lr_schedule(30, 1e-4, 30, 0.9) == doctest::Approx(9e-5).epsilon(1e-14));
  CHECK(lr_schedule(59, 1e-4, 30, 0.9) == doctest::Approx(9e-5).epsilon(1e-14));
  CHECK(lr_schedule(60, 1e-4, 30, 0.9) == doctest::Approx(8.1e-5).epsilon(1e-14));
  CHECK_THROWS_AS(lr_schedule(-1, 1e-4, 30, 0.9), ValidationError);
}

TEST_CASE("training defaults") {
  const TrainConfig c;
  CHECK(c.batch == 12);
  CHECK(c.lr == 1e-4);
  CHECK(c.decay_step == 30);
  CHECK(c.decay_rate == 0.9);
  CHECK(c.input_size == 352);
  CHECK(c.adam.beta1 == 0.9);
  CHECK(c.adam.beta2 == 0.999);
  CHECK(c.steps_per_epoch(25) == 3);
  CHECK(c.steps_per_epoch(5) == 1);
  CHECK(c.total_steps(25) == 150);
  TrainConfig bad;
  bad.input_size = 100;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("batch schedule") {
  TrainConfig c;
  c.batch = 3;
  c.seed = 11;
  for (std::int64_t epoch = 0; epoch < 3; ++epoch) {
    std::multiset<std::size_t> seen;
    for (std::int64_t s = 1; s <= 4; ++s) {
      const auto idx = batch_indices(10, c, epoch * 4 + s);
      CHECK(idx.size() == (s < 4 ? 3u : 1u));
      seen.insert(idx.begin(), idx.end());
    }
    CHECK(seen.size() == 10);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 10);
  }
  CHECK(batch_indices(10, c, 2) == batch_indices(10, c, 2));
  CHECK(batch_indices(10, c, 1) != batch_indices(10, c, 5));
  CHECK(step_seed(1, 2, 0) != step_seed(1, 2, 1));
  CHECK(step_seed(1, 2, 0) != step_seed(1, 3, 0));
  CHECK(step_seed(1, 2, 0) == step_seed(1, 2, 0));
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = scratch("ckpt");
  ModelConfig cfg = ModelConfig::reduced(64);
  cfg.seed = 3;
  Model model(cfg);
  Adam adam(model.parameters(), {});
  const auto data = synthetic_dataset(2, 64, 1);
  TrainConfig tc = small_train(2);
  tc.augment = false;
  train(model, adam, data, tc);

  write_checkpoint(make_checkpoint(model, &adam), dir / "a.mmft");
  const Checkpoint c = read_checkpoint(dir / "a.mmft");
  CHECK(c.version == kCheckpointVersion);
  const ModelConfig restored = model_config_from(c);
  CHECK(restored.input_size == 64);
  CHECK(restored.mft.heads == cfg.mft.heads);
  CHECK(restored.decoder.channels == cfg.decoder.channels);
  CHECK(restored.fusion == cfg.fusion);

  ModelConfig other = restored;
  other.seed = 99;
  Model fresh(other);
  CHECK(all_values(fresh) != all_values(model));
  load_parameters(fresh, c);
  CHECK(all_values(fresh) == all_values(model));
  Adam adam2(fresh.parameters(), {});
  CHECK(load_optimizer(adam2, fresh, c));
  CHECK(adam2.steps() == 2);
  CHECK(adam2.moments()[4].m == adam.moments()[4].m);
  CHECK(adam2.moments()[4].v == adam.moments()[4].v);

  const Tensor rgb = data[0].rgb;
  const Prediction a = predict(model, rgb), b = predict(fresh, rgb);
  for (std::size_t t = 0; t < kNumTasks; ++t) CHECK(vec(a[t]) == vec(b[t]));

  SUBCASE("weights-only checkpoints") {
    write_checkpoint(make_checkpoint(model, nullptr), dir / "w.mmft");
    Adam adam3(fresh.parameters(), {});
    CHECK_FALSE(load_optimizer(adam3, fresh, read_checkpoint(dir / "w.mmft")));
  }
  SUBCASE("corrupt and mismatched files") {
    {
      std::ofstream f(dir / "bad.mmft", std::ios::binary);
      f << "NOPE";
    }
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.mmft"), IoError);
    CHECK_THROWS_AS(read_checkpoint(dir / "missing.mmft"), IoError);
    // Truncation.
    const auto size = fs::file_size(dir / "a.mmft");
    fs::copy_file(dir / "a.mmft", dir / "t.mmft");
    fs::resize_file(dir / "t.mmft", size / 2);
    CHECK_THROWS_AS(read_checkpoint(dir / "t.mmft"), IoError);
    ModelConfig wide = restored;
    wide.fusion = FusionKind::ConvReplacement;
    Model conv(wide);
    CHECK_THROWS_AS(load_parameters(conv, c), ValidationError);
  }
}

TEST_CASE("training loop") {
  const fs::path dir = scratch("train");
  const auto data = synthetic_dataset(4, 64, 20);
  const TrainConfig tc = small_train(5);

  Model m1(ModelConfig::reduced(64));
  Adam a1(m1.parameters(), tc.adam);
  TrainOptions opts;
  opts.out_dir = dir / "run1";
  int callbacks = 0;
  opts.on_step = [&](const StepLog&) { ++callbacks; };
  const auto logs1 = train(m1, a1, data, tc, {}, opts);
  CHECK(logs1.size() == 5);
  CHECK(callbacks == 5);
  for (const auto& l : logs1) {
    CHECK(std::isfinite(l.total));
    CHECK(l.total == doctest::Approx(l.depth + l.saliency + l.contour).epsilon(1e-12));
    CHECK(l.epoch == (l.step - 1) / 2);
  }
  CHECK(fs::exists(dir / "run1" / "final.mmft"));
  {
    std::ifstream f(dir / "run1" / "loss_log.csv");
    std::string line;
    int lines = 0;
    while (std::getline(f, line)) ++lines;
    CHECK(lines == 6);
  }

  SUBCASE("same seed, same trace") {
    Model m2(ModelConfig::reduced(64));
    Adam a2(m2.parameters(), tc.adam);
    const auto logs2 = train(m2, a2, data, tc);
    CHECK(same_logs(logs1, logs2));
    CHECK(all_values(m1) == all_values(m2));
  }
  SUBCASE("resume reproduces an uninterrupted run") {
    TrainConfig every = tc;
    every.checkpoint_every = 3;
    Model m3(ModelConfig::reduced(64));
    Adam a3(m3.parameters(), tc.adam);
    TrainOptions stop;
    stop.out_dir = dir / "run3";
    stop.stop_after = 3;
    const auto head = train(m3, a3, data, every, {}, stop);
    CHECK(head.size() == 3);
    CHECK(fs::exists(dir / "run3" / "checkpoint_step3.mmft"));

    const Checkpoint c = read_checkpoint(dir / "run3" / "checkpoint_step3.mmft");
    Model m4(model_config_from(c));
    load_parameters(m4, c);
    Adam a4(m4.parameters(), tc.adam);
    REQUIRE(load_optimizer(a4, m4, c));
    const auto tail = train(m4, a4, data, tc);
    std::vector<StepLog> joined = head;
    joined.insert(joined.end(), tail.begin(), tail.end());
    CHECK(same_logs(joined, logs1));
    CHECK(all_values(m4) == all_values(m1));
  }
  SUBCASE("a different seed changes the trace") {
    TrainConfig other = tc;
    other.seed = 6;
    Model m5(ModelConfig::reduced(64));
    Adam a5(m5.parameters(), tc.adam);
    CHECK_FALSE(same_logs(train(m5, a5, data, other), logs1));
  }
  SUBCASE("input size must match the model") {
    TrainConfig wrong = tc;
    wrong.input_size = 96;
    Model m6(ModelConfig::reduced(64));
    Adam a6(m6.parameters(), tc.adam);
    CHECK_THROWS_AS(train(m6, a6, data, wrong), ValidationError);
  }
}

TEST_CASE("ablation variants train") {
  const auto data = synthetic_dataset(2, 64, 30);
  for (FusionKind kind : {FusionKind::Mft, FusionKind::MsfOff, FusionKind::ConvReplacement, FusionKind::NonLocal}) {
    ModelConfig cfg = ModelConfig::reduced(64);
    cfg.fusion = kind;
    Model model(cfg);
    Adam adam(model.parameters(), {});
    const auto logs = train(model, adam, data, small_train(2));
    INFO(fusion_name(kind));
    CHECK(logs.size() == 2);
    for (const auto& l : logs) CHECK(std::isfinite(l.total));
  }
}

TEST_CASE("evaluation") {
  auto samples = synthetic_dataset(3, 64, 40);
  std::vector<Prediction> perfect;
  for (const auto& s : samples) perfect.push_back({s.depth, s.saliency, s.contour});

  SUBCASE("perfect predictions") {
    const EvalResult r = evaluate_predictions(samples, perfect);
    CHECK(*r.mean.get("mae") == 0.0);
    CHECK(*r.mean.get("f_max") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*r.mean.get("auc") == 1.0);
    CHECK(*r.mean.get("rmse") == 0.0);
    CHECK(*r.mean.get("p1") == 1.0);
    CHECK(*r.mean.get("contour_mae") == 0.0);
  }
  SUBCASE("means aggregate per-image values") {
    Model model(ModelConfig::reduced(64));
    const EvalResult r = evaluate(model, samples);
    REQUIRE(r.images.size() == 3);
    for (const auto& [key, v] : r.mean.values) {
      double s = 0;
      for (const auto& img : r.images) s += *img.metrics.get(key);
      CHECK(v == doctest::Approx(s / 3).epsilon(1e-14));
    }
  }
  SUBCASE("samples without depth skip only depth metrics") {
    samples[1].has_depth = false;
    samples[1].valid = Tensor(samples[1].valid.shape(), 0.0);
    const EvalResult r = evaluate_predictions(samples, perfect);
    CHECK_FALSE(r.images[1].metrics.get("rmse").has_value());
    CHECK(r.images[1].metrics.get("mae").has_value());
    CHECK(r.images[0].metrics.get("rmse").has_value());
    CHECK(*r.mean.get("rmse") == 0.0);
  }
  SUBCASE("report files") {
    const fs::path dir = scratch("report");
    write_report(evaluate_predictions(samples, perfect), dir / "report.txt");
    std::ifstream f(dir / "report.txt");
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    CHECK(text.find("images=3") != std::string::npos);
    CHECK(text.find("e_measure_mode=max") != std::string::npos);
    CHECK(text.find("\nmae=0\n") != std::string::npos);
    std::ifstream csv(dir / "report.txt.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header.rfind("id,", 0) == 0);
  }
  CHECK_THROWS_AS(evaluate_predictions(samples, {}), ValidationError);
}

TEST_CASE("prediction") {
  Model model(ModelConfig::reduced(64));
  std::mt19937_64 rng(50);
  const Prediction p = predict(model, testing_util::constant({3, 80, 100}, rng, 0, 1));
  for (const auto& m : p) CHECK(m.shape() == Shape{1, 64, 64});
  CHECK_THROWS_AS(predict(model, Tensor(Shape{1, 64, 64})), ValidationError);

  const fs::path dir = scratch("predict");
  save_image(testing_util::constant({3, 64, 64}, rng, 0, 1), dir / "in.ppm");
  predict_to_dir(model, dir / "in.ppm", dir / "out");
  for (const char* name : {"saliency.pgm", "depth.pgm", "contour.pgm"}) {
    REQUIRE(fs::exists(dir / "out" / name));
    CHECK(load_image(dir / "out" / name).shape() == Shape{1, 64, 64});
  }
}

TEST_CASE("depth-free dataset evaluation") {
  const fs::path dir = scratch("depthfree");
  const auto samples = synthetic_dataset(2, 64, 60);
  for (std::size_t i = 0; i < samples.size(); ++i) write_sample(samples[i], dir, "s" + std::to_string(i));
  fs::remove_all(dir / "depth");
  const auto loaded = load_dataset(dir, 64);
  REQUIRE(loaded.size() == 2);
  for (const auto& s : loaded) CHECK_FALSE(s.has_depth);
  Model model(ModelConfig::reduced(64));
  const EvalResult r = evaluate(model, loaded);
  CHECK_FALSE(r.mean.get("rmse").has_value());
  CHECK(r.mean.get("f_max").has_value());
  CHECK(r.mean.get("s_measure").has_value());
}
