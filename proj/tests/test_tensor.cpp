// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "plasm/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace plasm;
using plasm::testing::grad_check;
using plasm::testing::probe_weights;
using plasm::testing::weighted_sum;

namespace {
const double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("elementwise basics") {
  auto x = TensorT<double>::from_data({3}, {-1.0, 0.5, 2.0});
  auto lr = leaky_relu(x, 0.01);
  CHECK(lr.value()[0] == doctest::Approx(-0.01));
  CHECK(lr.value()[1] == doctest::Approx(0.5));

  auto zeros = TensorT<double>::zeros({3});
  auto same = add(x, zeros);
  for (int i = 0; i < 3; ++i) CHECK(same.value()[i] == x.value()[i]);

  CHECK_THROWS_AS(add(x, TensorT<double>::zeros({4, 2})), ConfigError);
}

TEST_CASE("mul gradient matches finite differences") {
  auto a = TensorT<double>::from_data({1}, {2.0}, true);
  auto b = TensorT<double>::from_data({1}, {3.0}, true);
  auto res = grad_check([&]() { return reduce_sum(mul(a, b), {0}); }, {a, b}, 1e-6);
  CHECK(res.max_rel_err < 1e-6);
  backward(reduce_sum(mul(a, b), {0}));
  CHECK(a.grad()[0] == doctest::Approx(3.0));
}

TEST_CASE("matmul values") {
  auto eye = TensorT<double>::from_data({2, 2}, {1, 0, 0, 1});
  auto x = TensorT<double>::from_data({2, 2}, {5, 6, 7, 8});
  auto same = matmul(eye, x);
  for (int i = 0; i < 4; ++i) CHECK(same.value()[i] == x.value()[i]);

  auto a = TensorT<double>::from_data({2, 2}, {1, 2, 3, 4});
  auto ones = TensorT<double>::from_data({2, 1}, {1, 1});
  auto y = matmul(a, ones);
  CHECK(y.value()[0] == 3.0);
  CHECK(y.value()[1] == 7.0);

  CHECK_THROWS_AS(matmul(a, TensorT<double>::zeros({3, 2})), ConfigError);
}

TEST_CASE("matmul gradient vs finite differences") {
  Rng rng(11);
  auto a = rand_uniform<double>({4, 5}, rng, -1.0, 1.0);
  auto b = rand_uniform<double>({5, 3}, rng, -1.0, 1.0);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  auto w = probe_weights({4, 3}, 1);
  auto res = grad_check([&]() { return weighted_sum(matmul(a, b), w); }, {a, b});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("softmax contract") {
  auto even = softmax(TensorT<double>::from_data({2}, {0.0, 0.0}), 0);
  CHECK(even.value()[0] == doctest::Approx(0.5));
  CHECK(even.value()[1] == doctest::Approx(0.5));

  auto masked = softmax(TensorT<double>::from_data({2}, {0.0, -kInf}), 0);
  CHECK(masked.value()[0] == 1.0);
  CHECK(masked.value()[1] == 0.0);

  auto dead = softmax(TensorT<double>::from_data({3}, {-kInf, -kInf, -kInf}), 0);
  for (int i = 0; i < 3; ++i) CHECK(dead.value()[i] == 0.0);

  Rng rng(5);
  auto x = rand_uniform<double>({7}, rng, -3.0, 3.0);
  auto y = softmax(x, 0);
  double sum = 0;
  for (double v : y.value()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("reductions and shape ops") {
  auto c = TensorT<double>::full({2, 3}, 4.25);
  CHECK(reduce_mean(c, {0, 1}).item() == doctest::Approx(4.25));

  // row-major reshape keeps element order
  Rng rng(3);
  auto big = rand_uniform<double>({2, 10, 1, 16, 16}, rng);
  auto flat = reshape(big, {20, 1, 16, 16});
  CHECK(flat.value() == big.value());

  auto r1 = TensorT<double>::from_data({1, 3}, {1, 2, 3});
  auto r2 = TensorT<double>::from_data({1, 3}, {4, 5, 6});
  auto cat = concat<double>({r1, r2}, 0);
  CHECK(cat.shape() == Shape{2, 3});
  CHECK(cat.value() == std::vector<double>{1, 2, 3, 4, 5, 6});

  auto sl = slice(cat, 1, 1, 2);
  CHECK(sl.value() == std::vector<double>{2, 3, 5, 6});

  auto pm = permute(cat, {1, 0});
  CHECK(pm.shape() == Shape{3, 2});
  CHECK(pm.value() == std::vector<double>{1, 4, 2, 5, 3, 6});

  CHECK_THROWS_AS(reshape(cat, {5}), ConfigError);
  CHECK_THROWS_AS(reduce_sum(cat, {7}), ConfigError);
}

TEST_CASE("reduce_max routes gradient to first max on ties") {
  auto x = TensorT<double>::from_data({4}, {1.0, 3.0, 3.0, 2.0}, true);
  backward(reduce_max(x, {0}));
  CHECK(x.grad() == std::vector<double>{0, 1, 0, 0});
}

TEST_CASE("backward contract") {
  auto w = TensorT<double>::from_data({3}, {0.5, -1.0, 2.0}, true);
  backward(reduce_sum(w, {0}));
  CHECK(w.grad() == std::vector<double>{1, 1, 1});

  auto v = TensorT<double>::from_data({2}, {1.0, 2.0}, true);
  auto loss = reduce_sum(mul(v, v), {0});
  backward(loss);
  CHECK(v.grad()[0] == doctest::Approx(2.0));
  CHECK(v.grad()[1] == doctest::Approx(4.0));

  // repeated calls accumulate until zero_grad
  backward(loss);
  CHECK(v.grad()[0] == doctest::Approx(4.0));
  CHECK(v.grad()[1] == doctest::Approx(8.0));
  v.zero_grad();
  CHECK(v.grad()[0] == 0.0);

  CHECK_THROWS_AS(backward(mul(v, v)), ConfigError);  // not scalar
  auto nograd = TensorT<double>::from_data({1}, {1.0});
  CHECK_THROWS_AS(backward(nograd), ConfigError);
}

TEST_CASE("broadcasting forward and backward") {
  auto a = TensorT<double>::from_data({2, 2}, {1, 2, 3, 4}, true);
  auto b = TensorT<double>::from_data({2}, {10, 100}, true);
  auto y = mul(a, b);
  CHECK(y.value() == std::vector<double>{10, 200, 30, 400});
  backward(reduce_sum(y, {0, 1}));
  CHECK(a.grad() == std::vector<double>{10, 100, 10, 100});
  CHECK(b.grad() == std::vector<double>{4, 6});  // summed over the broadcast axis

  auto col = TensorT<double>::from_data({2, 1}, {1, 2});
  auto yc = add(a, col);
  CHECK(yc.value() == std::vector<double>{2, 3, 5, 6});
}

TEST_CASE("finite-difference property over the op set") {
  Rng rng(21);
  auto x = rand_uniform<double>({2, 3, 4}, rng, -1.0, 1.0);
  x.set_requires_grad(true);
  auto y = rand_uniform<double>({2, 3, 4}, rng, -1.0, 1.0);
  y.set_requires_grad(true);
  auto w = probe_weights({2, 3, 4}, 2);

  auto check = [&](const char* name, std::function<TensorT<double>()> fn,
                   std::vector<TensorT<double>> wrt) {
    auto res = grad_check(fn, std::move(wrt));
    INFO(name << " rel err " << res.max_rel_err);
    CHECK(res.max_rel_err < 1e-5);
  };

  check("add", [&]() { return weighted_sum(add(x, y), w); }, {x, y});
  check("sub", [&]() { return weighted_sum(sub(x, y), w); }, {x, y});
  check("mul", [&]() { return weighted_sum(mul(x, y), w); }, {x, y});
  check("scale", [&]() { return weighted_sum(scale(x, -1.7), w); }, {x});
  check("leaky_relu", [&]() { return weighted_sum(leaky_relu(x), w); }, {x});
  check("softmax", [&]() { return weighted_sum(softmax(x, 1), w); }, {x});
  check("reduce_sum", [&]() { return weighted_sum(reduce_sum(x, {1}), probe_weights({2, 4}, 3)); },
        {x});
  check("reduce_mean",
        [&]() { return weighted_sum(reduce_mean(x, {0, 2}), probe_weights({3}, 4)); }, {x});
  check("reduce_max", [&]() { return weighted_sum(reduce_max(x, {2}), probe_weights({2, 3}, 5)); },
        {x});
  check("reshape", [&]() { return weighted_sum(reshape(x, {6, 4}), probe_weights({6, 4}, 6)); },
        {x});
  check("permute",
        [&]() { return weighted_sum(permute(x, {2, 0, 1}), probe_weights({4, 2, 3}, 7)); }, {x});
  check("slice", [&]() { return weighted_sum(slice(x, 2, 1, 2), probe_weights({2, 3, 2}, 8)); },
        {x});
  check("concat",
        [&]() { return weighted_sum(concat<double>({x, y}, 1), probe_weights({2, 6, 4}, 9)); },
        {x, y});
  check("bmm",
        [&]() {
          return weighted_sum(bmm(x, permute(y, {0, 2, 1})), probe_weights({2, 3, 3}, 10));
        },
        {x, y});

  std::vector<uint8_t> mask(24, 0);
  for (size_t i = 0; i < mask.size(); i += 3) mask[i] = 1;
  check("masked_fill",
        [&]() {
          return weighted_sum(softmax(masked_fill(x, mask, -kInf), 2), w);
        },
        {x});
}

TEST_CASE("determinism: identical inputs give bit-identical results") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    auto a = rand_uniform<double>({8, 9}, rng, -1.0, 1.0);
    auto b = rand_uniform<double>({9, 7}, rng, -1.0, 1.0);
    auto y = softmax(matmul(leaky_relu(a), b), 1);
    return y.value();
  };
  CHECK(run(42) == run(42));
}

TEST_CASE("no-grad mode skips graph recording") {
  auto x = TensorT<double>::from_data({2}, {1.0, 2.0}, true);
  NoGradGuard guard;
  auto y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
}
