#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mmft/errors.hpp"
#include "mmft/gradcheck.hpp"
#include "mmft/ops.hpp"

using namespace mmft;
using testing_util::grad;
using testing_util::param;
using testing_util::vec;

TEST_CASE("elementwise basics") {
  const Tensor a(Shape{2}, {1, 2}), b(Shape{2}, {3, 4});
  CHECK(vec(add(a, b)) == oracle::Vec{4, 6});
  CHECK(vec(relu(Tensor(Shape{3}, {-1, 0, 2}))) == oracle::Vec{0, 0, 2});
  CHECK(vec(sigmoid(Tensor(Shape{1}, {0.0})))[0] == doctest::Approx(0.5));
}

TEST_CASE("shape ops") {
  std::mt19937_64 rng(1);
  const Tensor x = testing_util::constant({2, 3}, rng);
  CHECK(concat({x, x}, 0).shape() == Shape{4, 3});
  const Tensor t = permute(x, {1, 0});
  CHECK(t.shape() == Shape{3, 2});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(t.at({j, i}) == x.at({i, j}));
  CHECK(vec(slice(x, 1, 1, 2)) == oracle::Vec{x.at({0, 1}), x.at({0, 2}), x.at({1, 1}), x.at({1, 2})});
}

TEST_CASE("shape mismatch names both shapes and the op") {
  const Tensor a(Shape{2, 3}), b(Shape{3, 2});
  try {
    (void)add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[3,2]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(Tensor(Shape{2, 3}), Tensor(Shape{2, 3})), ShapeError);
}

TEST_CASE("matmul") {
  const Tensor m(Shape{2, 2}, {1, 2, 3, 4});
  CHECK(vec(matmul(Tensor(Shape{2, 2}, {1, 0, 0, 1}), m)) == vec(m));
  CHECK(vec(matmul(Tensor(Shape{1, 2}, {1, 0}), Tensor(Shape{2, 1}, {7, 9}))) == oracle::Vec{7});
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = testing_util::constant({3, 4}, rng), b = testing_util::constant({4, 2}, rng);
    CHECK(oracle::max_abs_diff(vec(matmul(a, b)), oracle::matmul(vec(a), vec(b), 3, 4, 2)) <= 1e-12);
  }
}

TEST_CASE("conv2d") {
  std::mt19937_64 rng(3);
  SUBCASE("1x1 identity kernel") {
    const Tensor x = testing_util::constant({1, 5, 5}, rng);
    CHECK(vec(conv2d(x, Tensor(Shape{1, 1, 1, 1}, {1.0}), Tensor(Shape{1}, {0.0}), 1, 0)) == vec(x));
  }
  SUBCASE("bias only") {
    const Tensor x = testing_util::constant({2, 4, 4}, rng);
    const Tensor y = conv2d(x, Tensor(Shape{3, 2, 3, 3}, 0.0), Tensor(Shape{3}, {0.5, -1, 2}), 1, 1);
    CHECK(y.at({0, 2, 1}) == 0.5);
    CHECK(y.at({1, 0, 0}) == -1);
    CHECK(y.at({2, 3, 3}) == 2);
  }
  SUBCASE("random vs direct sum") {
    for (int stride : {1, 2}) {
      for (int trial = 0; trial < 5; ++trial) {
        const Tensor x = testing_util::constant({3, 8, 8}, rng), w = testing_util::constant({4, 3, 3, 3}, rng),
                     b = testing_util::constant({4}, rng);
        int oh = 0, ow = 0;
        const auto ref = oracle::conv2d(vec(x), vec(w), vec(b), 3, 8, 8, 4, 3, stride, 1, oh, ow);
        const Tensor y = conv2d(x, w, b, stride, 1);
        CHECK(y.shape() == Shape{4, oh, ow});
        CHECK(oracle::max_abs_diff(vec(y), ref) <= 1e-12);
      }
    }
  }
}

TEST_CASE("softmax") {
  CHECK(vec(softmax(Tensor(Shape{2}, {0, 0}), 0)) == oracle::Vec{0.5, 0.5});
  const auto big = vec(softmax(Tensor(Shape{2}, {1000, 0}), 0));
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] == doctest::Approx(0.0));
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = testing_util::constant({3, 5}, rng, -5, 5);
    const auto s = vec(softmax(x, 1));
    const auto shifted = vec(softmax(add_scalar(x, 7.25), 1));
    for (int r = 0; r < 3; ++r) {
      double total = 0;
      for (int c = 0; c < 5; ++c) total += s[r * 5 + c];
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
    CHECK(oracle::max_abs_diff(s, shifted) <= 1e-12);
  }
}

TEST_CASE("resize_bilinear") {
  const Tensor c(Shape{1, 3, 3}, 0.7);
  for (double v : vec(resize_bilinear(c, 7, 5))) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
  std::mt19937_64 rng(5);
  const Tensor x = testing_util::constant({2, 4, 6}, rng);
  CHECK(vec(resize_bilinear(x, 4, 6)) == vec(x));

  // Hand-evaluated 2x2 -> 4x4: source coordinates are -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to 1).
  const Tensor small(Shape{1, 2, 2}, {0, 1, 2, 3});
  const oracle::Vec axis_w{0.0, 0.25, 0.75, 1.0};  // weight of index 1 along each axis
  oracle::Vec expected(16);
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col) expected[r * 4 + col] = 2 * axis_w[r] + 1 * axis_w[col];
  CHECK(oracle::max_abs_diff(vec(resize_bilinear(small, 4, 4)), expected) <= 1e-15);

  const Tensor y = testing_util::constant({2, 5, 3}, rng);
  CHECK(oracle::max_abs_diff(vec(resize_bilinear(y, 11, 8)), oracle::resize_bilinear(vec(y), 2, 5, 3, 11, 8)) <= 1e-12);
}

TEST_CASE("avgpool") {
  const Tensor c(Shape{1, 6, 6}, 2.5);
  CHECK(avgpool(c, 3, 1, 1).at({0, 2, 3}) == doctest::Approx(2.5));
  std::mt19937_64 rng(6);
  const Tensor x = testing_util::constant({2, 4, 4}, rng);
  CHECK(vec(avgpool(x, 1, 1, 0)) == vec(x));
  oracle::Vec ramp(16);
  for (int i = 0; i < 16; ++i) ramp[i] = i;
  int oh = 0, ow = 0;
  const auto ref = oracle::avgpool(ramp, 1, 4, 4, 3, 1, 1, oh, ow);
  CHECK(oracle::max_abs_diff(vec(avgpool(Tensor(Shape{1, 4, 4}, ramp), 3, 1, 1)), ref) <= 1e-14);
}

TEST_CASE("grouped dynamic filter") {
  std::mt19937_64 rng(7);
  const Tensor x = testing_util::constant({4, 5, 5}, rng);
  SUBCASE("identity filters") {
    std::vector<Real> f(2 * 5 * 5 * 9, 0.0);
    for (std::size_t i = 4; i < f.size(); i += 9) f[i] = 1.0;
    CHECK(vec(grouped_dynamic_filter(x, Tensor(Shape{2, 5, 5, 3, 3}, f))) == vec(x));
  }
  SUBCASE("box filter on a constant map counts valid neighbours") {
    const Tensor ones(Shape{2, 4, 4}, 1.0);
    const Tensor y = grouped_dynamic_filter(ones, Tensor(Shape{1, 4, 4, 3, 3}, 1.0 / 9));
    CHECK(y.at({0, 1, 1}) == doctest::Approx(1.0));
    CHECK(y.at({1, 0, 0}) == doctest::Approx(4.0 / 9));
    CHECK(y.at({0, 0, 2}) == doctest::Approx(6.0 / 9));
  }
  SUBCASE("oracle") {
    const Tensor f = testing_util::constant({2, 5, 5, 3, 3}, rng);
    CHECK(oracle::max_abs_diff(vec(grouped_dynamic_filter(x, f)),
                               oracle::grouped_dynamic_filter(vec(x), vec(f), 4, 5, 5, 2, 3)) <= 1e-12);
  }
  SUBCASE("linear in each argument") {
    const Tensor f = testing_util::constant({2, 5, 5, 3, 3}, rng), g = testing_util::constant({2, 5, 5, 3, 3}, rng);
    const Tensor x2 = testing_util::constant({4, 5, 5}, rng);
    CHECK(oracle::max_abs_diff(vec(grouped_dynamic_filter(add(x, scale(x2, 2.0)), f)),
                               vec(add(grouped_dynamic_filter(x, f), scale(grouped_dynamic_filter(x2, f), 2.0)))) <=
          1e-12);
    CHECK(oracle::max_abs_diff(vec(grouped_dynamic_filter(x, add(f, g))),
                               vec(add(grouped_dynamic_filter(x, f), grouped_dynamic_filter(x, g)))) <= 1e-12);
  }
  CHECK_THROWS_AS(grouped_dynamic_filter(Tensor(Shape{3, 5, 5}), Tensor(Shape{2, 5, 5, 3, 3})), ShapeError);
}

TEST_CASE("backward") {
  SUBCASE("sum gives ones") {
    Tensor x = Tensor::parameter({3}, {1, 2, 3});
    sum(x).backward();
    CHECK(grad(x) == oracle::Vec{1, 1, 1});
  }
  SUBCASE("sum of squares") {
    Tensor x = Tensor::parameter({2}, {1, 2});
    sum(mul(x, x)).backward();
    CHECK(grad(x) == oracle::Vec{2, 4});
  }
  SUBCASE("unused leaves get zero") {
    Tensor x = Tensor::parameter({2}, {1, 2}), unused = Tensor::parameter({2}, {5, 6});
    sum(x).backward();
    CHECK(grad(unused) == oracle::Vec{0, 0});
  }
  SUBCASE("non-scalar root and reused graph") {
    Tensor x = Tensor::parameter({2}, {1, 2});
    CHECK_THROWS_AS(mul(x, x).backward(), GraphError);
    const Tensor y = sum(mul(x, x));
    y.backward();
    CHECK_THROWS_AS(y.backward(), GraphError);
  }
  SUBCASE("linearity over two graphs") {
    std::mt19937_64 rng(8);
    Tensor x = param({2, 3}, rng);
    const Tensor w = testing_util::constant({3, 3}, rng);
    auto f1 = [&] { return sum(relu(matmul(x, w))); };
    auto f2 = [&] { return sum(mul(sigmoid(x), x)); };
    f1().backward();
    const auto g1 = grad(x);
    x.zero_grad();
    f2().backward();
    const auto g2 = grad(x);
    x.zero_grad();
    add(f1(), f2()).backward();
    const auto g12 = grad(x);
    for (std::size_t i = 0; i < g12.size(); ++i) CHECK(g12[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-13));
  }
  SUBCASE("no-grad guard records nothing") {
    Tensor x = Tensor::parameter({2}, {1, 2});
    NoGradGuard guard;
    CHECK_FALSE(mul(x, x).requires_grad());
  }
}

TEST_CASE("grad_check harness") {
  std::mt19937_64 rng(9);
  SUBCASE("linear function has zero error") {
    const Tensor x = param({4, 3}, rng);
    const auto r = grad_check([&] { return mean(x); }, std::vector<Tensor>{x});
    CHECK(r.passed);
    CHECK(r.max_rel_error <= 1e-9);
  }
  SUBCASE("L1 away from zero residuals") {
    const Tensor x = param({10}, rng, 0.5, 1.0);
    const Tensor target = testing_util::constant({10}, rng, -1.0, 0.0);
    const auto r = grad_check([&] { return mean(abs(sub(x, target))); }, std::vector<Tensor>{x});
    CHECK(r.max_rel_error <= 1e-4);
  }
  SUBCASE("conv relu mean composite") {
    const Tensor x = param({2, 6, 6}, rng), w = param({3, 2, 3, 3}, rng), b = param({3}, rng);
    const auto r = grad_check([&] { return mean(relu(conv2d(x, w, b, 1, 1))); }, std::vector<Tensor>{x, w, b});
    CHECK(r.max_rel_error <= 1e-4);
  }
  SUBCASE("a wrong gradient is caught") {
    const Tensor x = param({5}, rng, 0.5, 1.0);
    // Squaring op whose backward drops the factor 2.
    auto bad_square = [](const Tensor& a) {
      std::vector<Real> out(a.values().begin(), a.values().end());
      for (auto& v : out) v *= v;
      return detail::make_result(a.shape(), std::move(out), {a}, "bad_square", [](detail::Node& o) {
        auto& in = *o.inputs[0];
        auto g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * in.value[i];
      });
    };
    const auto r = grad_check([&] { return sum(bad_square(x)); }, std::vector<Tensor>{x});
    CHECK_FALSE(r.passed);
  }
}
