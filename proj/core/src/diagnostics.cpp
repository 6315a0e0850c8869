#include "mmft/diagnostics.hpp"

#include <functional>
#include <map>

#include "mmft/decoder.hpp"
#include "mmft/encoder.hpp"
#include "mmft/errors.hpp"
#include "mmft/fusion.hpp"
#include "mmft/losses.hpp"
#include "mmft/model.hpp"
#include "mmft/ops.hpp"

namespace mmft {

namespace {

/// A scalarized check target: every output is dotted with a fixed random
/// weight map and the results are summed.
struct Target {
  std::function<std::vector<Tensor>()> body;
  NamedTensors leaves;
  std::int64_t max_coords = 0;
  bool kink_aware = false;
  // Keeps parameter owners alive for the lifetime of the closures.
  std::shared_ptr<void> owner;
};

using Builder = std::function<Target(Rng&)>;

Tensor random_leaf(Shape shape, Rng& rng, Real lo, Real hi, Real min_abs = 0) {
  std::uniform_real_distribution<Real> u(lo, hi);
  std::vector<Real> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) {
    do {
      x = u(rng);
    } while (std::abs(x) < min_abs);
  }
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor flat(const Tensor& x) { return reshape(x, {x.numel()}); }

Tensor uniform_leaf(Shape shape, Rng& rng) { return random_leaf(std::move(shape), rng, -1.0, 1.0); }

Target single_op(Rng& rng, std::vector<Shape> shapes, std::function<Tensor(const std::vector<Tensor>&)> op,
                 Real lo = -1.0, Real hi = 1.0, Real min_abs = 0) {
  Target t;
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    inputs.push_back(random_leaf(shapes[i], rng, lo, hi, min_abs));
    t.leaves.emplace_back("x" + std::to_string(i), inputs.back());
  }
  t.body = [inputs, op] { return std::vector<Tensor>{op(inputs)}; };
  return t;
}

NamedTensors store_leaves(const ParameterStore& store) { return store.entries(); }

// Zero biases put units exactly on ReLU kinks wherever a window is all zeros;
// check at a generic point instead.
void jitter_biases(const ParameterStore& store, Rng& rng) {
  std::normal_distribution<Real> jitter(0.0, 0.05);
  for (const auto& [name, p] : store.entries()) {
    if (name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0) {
      Tensor handle = p;
      for (auto& v : handle.mutable_values()) v += jitter(rng);
    }
  }
}

FeatureTriple random_triple(Shape shape, Rng& rng, NamedTensors& leaves) {
  FeatureTriple t;
  for (Task task : kTasks) {
    t[task] = uniform_leaf(shape, rng);
    leaves.emplace_back("input." + std::string(task_name(task)), t[task]);
  }
  return t;
}

std::vector<Tensor> triple_outputs(const FeatureTriple& t) { return {t.maps.begin(), t.maps.end()}; }

MftConfig small_mft() {
  MftConfig c;
  c.heads = 2;
  c.head_dim = 3;
  c.model_dim = 12;
  c.modality_channels = 4;
  c.layers = 2;
  c.ffn_dim = 16;
  c.filter_hidden = 3;
  c.groups = 2;
  return c;
}

Target fusion_target(FusionKind kind, Rng& rng) {
  auto store = std::make_shared<ParameterStore>();
  MftConfig cfg = small_mft();
  std::shared_ptr<Level5Fusion> block = make_fusion(kind, cfg, *store, rng);
  Target t;
  t.leaves = store_leaves(*store);
  const FeatureTriple in = random_triple({4, 3, 3}, rng, t.leaves);
  t.body = [block, in] { return triple_outputs((*block)(in)); };
  t.owner = store;
  return t;
}

LevelMaps probability_maps(Shape shape, Rng& rng, NamedTensors& leaves, const std::string& name) {
  LevelMaps out;
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    out[l] = random_leaf(shape, rng, 0.05, 0.95);
    leaves.emplace_back(name + ".level" + std::to_string(l + 1), out[l]);
  }
  return out;
}

Tensor binary_map(Shape shape, Rng& rng) {
  std::bernoulli_distribution b(0.4);
  std::vector<Real> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = b(rng) ? 1.0 : 0.0;
  v[0] = 1.0;
  return Tensor(std::move(shape), std::move(v));
}

const std::map<std::string, Builder>& registry() {
  static const std::map<std::string, Builder> r = [] {
    std::map<std::string, Builder> m;
    const Shape s{2, 3, 4};
    m["op:add"] = [s](Rng& rng) {
      return single_op(rng, {s, s, {4}, {2, 1, 1}}, [](const auto& x) {
        return concat({add(x[0], x[1]), add(x[0], x[2]), add(x[0], x[3])}, 0);
      });
    };
    m["op:sub"] = [s](Rng& rng) {
      return single_op(rng, {s, s, {3, 4}}, [](const auto& x) { return concat({sub(x[0], x[1]), sub(x[2], x[0])}, 0); });
    };
    m["op:mul"] = [s](Rng& rng) {
      return single_op(rng, {s, s, {2}}, [](const auto& x) { return concat({mul(x[0], x[1]), mul(x[0], x[2])}, 0); });
    };
    m["op:div"] = [s](Rng& rng) {
      return single_op(rng, {s, s}, [](const auto& x) { return div(x[0], x[1]); }, 0.5, 1.5);
    };
    m["op:add_scalar"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return add_scalar(x[0], 0.7); }); };
    m["op:scale"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return scale(x[0], -1.3); }); };
    m["op:neg"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return neg(x[0]); }); };
    m["op:rsub_scalar"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return rsub_scalar(1.0, x[0]); }); };
    m["op:relu"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return relu(x[0]); }, -1, 1, 0.05); };
    m["op:sigmoid"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return sigmoid(x[0]); }, -3, 3); };
    m["op:log"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return log(x[0]); }, 0.2, 2.0); };
    m["op:exp"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return exp(x[0]); }); };
    m["op:abs"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return abs(x[0]); }, -1, 1, 0.05); };
    m["op:square"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return square(x[0]); }); };
    m["op:sqrt"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return sqrt(x[0]); }, 0.2, 2.0); };
    m["op:clamp"] = [s](Rng& rng) {
      // Bounds sit at 0 (or beyond the input range) so no input is within 0.05 of a kink.
      return single_op(rng, {s}, [](const auto& x) {
        return concat({clamp(x[0], 0.0, 2.0), clamp(x[0], -2.0, 0.0)}, 0);
      }, -1, 1, 0.05);
    };
    m["op:sum"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return sum(x[0]); }); };
    m["op:mean"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return mean(x[0]); }); };
    m["op:reshape"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return reshape(x[0], {6, 4}); }); };
    m["op:permute"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return permute(x[0], {2, 0, 1}); }); };
    m["op:transpose"] = [](Rng& rng) { return single_op(rng, {{3, 5}}, [](const auto& x) { return transpose(x[0]); }); };
    m["op:concat"] = [](Rng& rng) {
      return single_op(rng, {{2, 3, 4}, {2, 2, 4}}, [](const auto& x) { return concat({x[0], x[1]}, 1); });
    };
    m["op:slice"] = [s](Rng& rng) { return single_op(rng, {s}, [](const auto& x) { return slice(x[0], 2, 1, 2); }); };
    m["op:matmul"] = [](Rng& rng) {
      return single_op(rng, {{3, 4}, {4, 5}}, [](const auto& x) { return matmul(x[0], x[1]); });
    };
    m["op:conv2d"] = [](Rng& rng) {
      return single_op(rng, {{3, 7, 7}, {4, 3, 3, 3}, {4}, {2, 3, 1, 1}}, [](const auto& x) {
        return concat({flat(conv2d(x[0], x[1], x[2], 1, 1)), flat(conv2d(x[0], x[1], x[2], 2, 1)),
                       flat(conv2d(x[0], x[3], Tensor(), 1, 0))},
                      0);
      });
    };
    m["op:softmax"] = [](Rng& rng) {
      return single_op(rng, {{4, 5}}, [](const auto& x) { return concat({softmax(x[0], 0), softmax(x[0], 1)}, 0); }, -2, 2);
    };
    m["op:resize_bilinear"] = [](Rng& rng) {
      return single_op(rng, {{2, 5, 5}}, [](const auto& x) {
        return concat({flat(resize_bilinear(x[0], 8, 8)), flat(resize_bilinear(x[0], 3, 4))}, 0);
      });
    };
    m["op:avgpool"] = [](Rng& rng) {
      return single_op(rng, {{2, 7, 7}}, [](const auto& x) {
        return concat({flat(avgpool(x[0], 3, 1, 1)), flat(avgpool(x[0], 3, 2, 1))}, 0);
      });
    };
    m["op:separable_filter"] = [](Rng& rng) {
      return single_op(rng, {{2, 9, 9}}, [](const auto& x) {
        const std::vector<Real> k{0.25, 0.5, 0.25};
        return separable_filter_valid(x[0], k);
      });
    };
    m["op:grouped_dynamic_filter"] = [](Rng& rng) {
      return single_op(rng, {{4, 5, 5}, {2, 5, 5, 3, 3}},
                       [](const auto& x) { return grouped_dynamic_filter(x[0], x[1]); });
    };

    m["module:squeeze_expand"] = [](Rng& rng) {
      auto store = std::make_shared<ParameterStore>();
      auto block = std::make_shared<SqueezeExpand>(4, *store, "se", rng);
      Target t;
      t.leaves = store_leaves(*store);
      const FeatureTriple in = random_triple({4, 6, 6}, rng, t.leaves);
      t.body = [block, in] { return triple_outputs((*block)(in)); };
      t.owner = store;
      return t;
    };
    m["module:side_head"] = [](Rng& rng) {
      auto store = std::make_shared<ParameterStore>();
      auto head = std::make_shared<SideHead>(4, *store, "side", rng);
      Target t;
      t.leaves = store_leaves(*store);
      const Tensor in = uniform_leaf({4, 4, 4}, rng);
      t.leaves.emplace_back("input", in);
      t.body = [head, in] { return std::vector<Tensor>{(*head)(in, 8)}; };
      t.owner = store;
      return t;
    };
    m["module:top_down_merge"] = [](Rng& rng) {
      auto store = std::make_shared<ParameterStore>();
      auto merge = std::make_shared<TopDownMerge>(4, 3, 5, *store, "merge", rng);
      Target t;
      t.leaves = store_leaves(*store);
      const FeatureTriple in = random_triple({4, 3, 3}, rng, t.leaves);
      const Tensor skip = uniform_leaf({5, 6, 6}, rng);
      t.leaves.emplace_back("skip", skip);
      t.body = [merge, in, skip] { return triple_outputs((*merge)(in, skip)); };
      t.owner = store;
      return t;
    };
    m["module:encoder"] = [](Rng& rng) {
      auto store = std::make_shared<ParameterStore>();
      EncoderConfig cfg;
      cfg.input_size = 32;
      cfg.channels = {2, 3, 3, 4, 4};
      auto enc = std::make_shared<Encoder>(cfg, *store, rng);
      auto stems = std::make_shared<ModalityStems>(4, 2, *store, rng);
      jitter_biases(*store, rng);
      Target t;
      t.leaves = store_leaves(*store);
      const Tensor rgb = random_leaf({3, 32, 32}, rng, 0.0, 1.0);
      t.body = [enc, stems, rgb] {
        const FeaturePyramid p = (*enc)(rgb);
        std::vector<Tensor> out(p.levels.begin(), p.levels.end());
        for (const auto& m : (*stems)(p.levels[4]).maps) out.push_back(m);
        return out;
      };
      t.owner = std::make_shared<std::pair<std::shared_ptr<Encoder>, std::shared_ptr<ParameterStore>>>(enc, store);
      t.max_coords = 12;
      t.kink_aware = true;
      return t;
    };
    m["module:mhsa"] = [](Rng& rng) {
      auto store = std::make_shared<ParameterStore>();
      const MhsaParams p = MhsaParams::create(*store, "attn", 8, 2, 3, rng);
      Target t;
      t.leaves = store_leaves(*store);
      const Tensor q = uniform_leaf({4, 8}, rng), k = uniform_leaf({4, 8}, rng), v = uniform_leaf({4, 8}, rng);
      t.leaves.emplace_back("q", q);
      t.leaves.emplace_back("k", k);
      t.leaves.emplace_back("v", v);
      t.body = [p, q, k, v] { return std::vector<Tensor>{mhsa(q, k, v, p, 2, 3)}; };
      t.owner = store;
      return t;
    };
    m["module:transformer_layer"] = [](Rng& rng) {
      auto store = std::make_shared<ParameterStore>();
      const MftConfig cfg = small_mft();
      const auto p = TransformerLayerParams::create(*store, "layer", cfg, rng);
      Target t;
      t.leaves = store_leaves(*store);
      const Tensor x = uniform_leaf({5, cfg.model_dim}, rng);
      const Tensor pos = uniform_leaf({5, cfg.model_dim}, rng);
      t.leaves.emplace_back("tokens", x);
      t.leaves.emplace_back("pos", pos);
      t.body = [p, x, pos, cfg] { return std::vector<Tensor>{transformer_layer(x, pos, p, cfg)}; };
      t.owner = store;
      return t;
    };
    m["module:filter_generator"] = [](Rng& rng) {
      auto store = std::make_shared<ParameterStore>();
      auto gen = std::make_shared<DynamicFilterGenerator>(4, 3, 2, 3, *store, "gen", rng);
      Target t;
      t.leaves = store_leaves(*store);
      const Tensor x = uniform_leaf({4, 3, 3}, rng), v = uniform_leaf({4, 3, 3}, rng);
      t.leaves.emplace_back("features", x);
      t.leaves.emplace_back("filtered", v);
      t.body = [gen, x, v] { return std::vector<Tensor>{(*gen)(x), apply_grouped_dynamic_filter(v, (*gen)(x))}; };
      t.owner = store;
      return t;
    };
    m["module:mft"] = [](Rng& rng) { return fusion_target(FusionKind::Mft, rng); };
    m["module:mft_msf_off"] = [](Rng& rng) { return fusion_target(FusionKind::MsfOff, rng); };
    m["module:conv_fusion"] = [](Rng& rng) { return fusion_target(FusionKind::ConvReplacement, rng); };
    m["module:non_local_fusion"] = [](Rng& rng) { return fusion_target(FusionKind::NonLocal, rng); };

    m["module:ssim_loss"] = [](Rng& rng) {
      Target t;
      const Tensor p = random_leaf({1, 13, 13}, rng, 0.05, 0.95), g = random_leaf({1, 13, 13}, rng, 0.05, 0.95);
      t.leaves = {{"pred", p}, {"gt", g}};
      t.body = [p, g] { return std::vector<Tensor>{ssim_loss(p, g)}; };
      return t;
    };
    m["module:depth_loss"] = [](Rng& rng) {
      Target t;
      const LevelMaps preds = probability_maps({1, 12, 12}, rng, t.leaves, "pred");
      const Tensor gt = random_leaf({1, 12, 12}, rng, 0.0, 1.0);
      const Tensor valid = binary_map({1, 12, 12}, rng);
      t.body = [preds, gt, valid] { return std::vector<Tensor>{depth_loss(preds, gt.detach(), valid)}; };
      t.kink_aware = true;  // the L1 term
      return t;
    };
    m["module:saliency_loss"] = [](Rng& rng) {
      Target t;
      const LevelMaps preds = probability_maps({1, 12, 12}, rng, t.leaves, "pred");
      const Tensor gt = binary_map({1, 12, 12}, rng);
      t.body = [preds, gt] { return std::vector<Tensor>{saliency_loss(preds, gt)}; };
      return t;
    };
    m["module:contour_loss"] = [](Rng& rng) {
      Target t;
      const LevelMaps preds = probability_maps({1, 12, 12}, rng, t.leaves, "pred");
      const Tensor gt = binary_map({1, 12, 12}, rng);
      t.body = [preds, gt] { return std::vector<Tensor>{contour_loss(preds, gt)}; };
      return t;
    };
    m["module:total_loss"] = [](Rng& rng) {
      Target t;
      const Sample sample = generate_synthetic(rng(), 16, 16, 3);
      SideOutputs side;
      for (Task task : kTasks) {
        const LevelMaps maps = probability_maps({1, 16, 16}, rng, t.leaves, std::string(task_name(task)));
        for (std::size_t l = 0; l < kNumLevels; ++l) side.at(l, task) = maps[l];
      }
      t.body = [side, sample] { return std::vector<Tensor>{total_loss(side, sample).total}; };
      t.kink_aware = true;  // the depth L1 term
      return t;
    };
    m["model"] = [](Rng& rng) {
      ModelConfig cfg = ModelConfig::reduced(64);
      cfg.seed = rng();
      auto model = std::make_shared<Model>(cfg);
      jitter_biases(model->parameters(), rng);
      const Sample sample = generate_synthetic(rng(), 64, 64, 3);
      Target t;
      t.leaves = store_leaves(model->parameters());
      t.body = [model, sample] { return std::vector<Tensor>{total_loss(model->forward(sample.rgb).side, sample).total}; };
      t.owner = model;
      t.max_coords = 3;
      t.kink_aware = true;
      return t;
    };
    return m;
  }();
  return r;
}

}  // namespace

std::vector<std::string> gradcheck_scopes() {
  std::vector<std::string> out;
  for (const auto& [name, b] : registry()) out.push_back(name);
  return out;
}

GradCheckReport run_gradcheck(const std::string& scope, std::uint64_t seed, GradCheckOptions options) {
  const auto& r = registry();
  const auto it = r.find(scope);
  if (it == r.end()) throw ValidationError("unknown gradcheck scope '" + scope + "'");
  Rng rng(seed);
  Target target = it->second(rng);

  std::vector<Tensor> weights;
  {
    NoGradGuard guard;
    std::normal_distribution<Real> n(0.0, 1.0);
    for (const Tensor& y : target.body()) {
      std::vector<Real> w(static_cast<std::size_t>(y.numel()));
      for (auto& v : w) v = n(rng);
      weights.emplace_back(y.shape(), std::move(w));
    }
  }
  const auto objective = [&target, &weights] {
    const auto outs = target.body();
    Tensor total = sum(mul(outs[0], weights[0]));
    for (std::size_t i = 1; i < outs.size(); ++i) total = add(total, sum(mul(outs[i], weights[i])));
    return total;
  };
  options.seed = seed;
  options.kink_aware = options.kink_aware || target.kink_aware;
  if (target.max_coords > 0 && (options.max_coords_per_leaf <= 0 || options.max_coords_per_leaf > target.max_coords)) {
    options.max_coords_per_leaf = target.max_coords;
  }
  return grad_check(objective, target.leaves, options);
}

}  // namespace mmft
