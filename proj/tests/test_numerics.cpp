// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "omnifuse/numerics/gradcheck.hpp"
#include "omnifuse/numerics/layers.hpp"
#include "omnifuse/numerics/ops.hpp"
#include "omnifuse/numerics/optim.hpp"
#include "support/gradcheck_suite.hpp"

using namespace omnifuse;

namespace {

Tensor square_sum(const Tensor& x) { return sum(mul(x, x)); }

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("matmul with the identity returns the other factor") {
  Rng rng(1);
  const Tensor a = normal_tensor({3, 3}, 1.0, rng, false);
  const Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor out = matmul(eye, a);
  CHECK(bitwise_equal(out.data(), a.data()));
}

TEST_CASE("softmax of equal logits is uniform") {
  const Tensor p = softmax_lastdim(Tensor::from({3}, {0, 0, 0}));
  for (double v : p.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("softmax outputs lie in (0,1) and sum to one") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = normal_tensor({4, 7}, 3.0, rng, false);
    const Tensor p = softmax_lastdim(x);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        const double v = p[r * 7 + c];
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("causal softmax zeroes the upper triangle") {
  const Tensor p = softmax_lastdim(Tensor::from({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}), true);
  CHECK(p[1] == 0.0);
  CHECK(p[2] == 0.0);
  CHECK(p[5] == 0.0);
  CHECK(p[0] == 1.0);
}

TEST_CASE("gelu uses the exact erf form") {
  CHECK(gelu(Tensor::scalar(0.0)).item() == 0.0);
  const double a = gelu(Tensor::scalar(2.0)).item();
  const double b = gelu(Tensor::scalar(-2.0)).item();
  // x * Phi(x) - (-x) * Phi(-x) = x * (Phi(x) + Phi(-x)) = x.
  CHECK(std::abs(a - b - 2.0) <= 1e-12);
  CHECK(std::abs(a + b - 2.0 * std::erf(std::sqrt(2.0))) <= 1e-12);
  CHECK(a == doctest::Approx(2.0 * 0.5 * (1.0 + std::erf(2.0 / std::sqrt(2.0)))).epsilon(1e-15));
}

TEST_CASE("backward of a squared sum") {
  Tensor x = Tensor::from({1}, {3.0}, true);
  backward(square_sum(x));
  CHECK(x.grad()[0] == 6.0);
}

TEST_CASE("cross-entropy gradient is p minus one-hot") {
  Tensor logits = Tensor::from({1, 2}, {0.0, 0.0}, true);
  const std::size_t target[] = {0};
  backward(cross_entropy(logits, target));
  CHECK(logits.grad()[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(logits.grad()[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("gradients accumulate until zeroed") {
  Tensor x = Tensor::from({2}, {1.0, -2.0}, true);
  backward(square_sum(x));
  backward(square_sum(x));
  CHECK(x.grad()[0] == 4.0);
  CHECK(x.grad()[1] == -8.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward rejects non-scalars and consumed tapes") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), NumericsError);
  const Tensor loss = square_sum(x);
  backward(loss);
  CHECK_THROWS_AS(backward(loss), TapeError);
}

TEST_CASE("ops reject mismatched shapes and non-finite input") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, Tensor::zeros({4})), ShapeError);
  CHECK_THROWS_AS(Tensor::from({2}, {1.0, std::nan("")}), NonFiniteError);
  Tensor bad = Tensor::zeros({2});
  bad.mutable_data()[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(gelu(bad), NonFiniteError);
  CHECK_THROWS_AS(Tensor::from({3}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("op_forward dispatches every kind") {
  const Tensor x = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(std::string(op_name(OpKind::kLayerNorm)) == "layer_norm");
  const Tensor parts[] = {x, x};
  CHECK(op_forward(OpKind::kMatmul, parts).shape() == Shape{2, 2});
  CHECK(op_forward(OpKind::kConcatAxis, parts, {.axis = 1}).shape() == Shape{2, 4});
  const Tensor one[] = {x};
  CHECK(op_forward(OpKind::kMeanPoolAxis, one, {.axis = 0, .group = 2}).shape() == Shape{1, 2});
  OpArgs ce;
  ce.indices = {0, 1};
  CHECK(op_forward(OpKind::kCrossEntropy, one, ce).numel() == 1);
}

TEST_CASE("mean pooling averages a trailing partial group over its length") {
  const Tensor x = Tensor::from({5, 1}, {1, 2, 3, 10, 20});
  const Tensor p = mean_pool_axis(x, 0, 3);
  REQUIRE(p.shape() == Shape{2, 1});
  CHECK(p[0] == 2.0);
  CHECK(p[1] == 15.0);
}

TEST_CASE("finite differences of simple functions") {
  const Tensor x = Tensor::from({2}, {1.0, 2.0});
  const Tensor ones = finite_diff_grad([](const Tensor& t) { return sum(t); }, x);
  CHECK(ones[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ones[1] == doctest::Approx(1.0).epsilon(1e-9));
  const Tensor g = finite_diff_grad(square_sum, x);
  CHECK(std::abs(g[0] - 2.0) <= 1e-6);
  CHECK(std::abs(g[1] - 4.0) <= 1e-6);
  CHECK_THROWS_AS(finite_diff_grad(square_sum, x, 0.0), NumericsError);
}

TEST_CASE("adam first step moves a scalar by lr") {
  ParamGroup g{"p", {{"w", Tensor::from({1}, {1.0}, true)}}, false};
  g.params[0].tensor.mutable_grad()[0] = 1.0;
  Adam adam({.lr = 0.1});
  std::vector<ParamGroup> groups{g};
  adam.step(groups);
  // m_hat = v_hat = 1, so the update is lr / (1 + eps).
  CHECK(groups[0].params[0].tensor[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adam leaves zero gradients and frozen groups alone") {
  Rng rng(3);
  std::vector<ParamGroup> groups{{"live", {{"a", normal_tensor({4}, 1.0, rng)}}, false},
                                 {"frozen", {{"b", normal_tensor({4}, 1.0, rng)}}, true}};
  const std::vector<double> before_live(groups[0].params[0].tensor.data().begin(),
                                        groups[0].params[0].tensor.data().end());
  const std::uint64_t frozen_hash = parameter_hash(groups[1]);
  Adam adam({.lr = 0.05});
  adam.step(groups);  // zero grads everywhere
  CHECK(bitwise_equal(groups[0].params[0].tensor.data(), before_live));
  for (int step = 0; step < 100; ++step) {
    for (auto& g : groups) {
      for (auto& p : g.params) {
        for (auto& v : p.tensor.mutable_grad()) v = std::sin(step + v + 1.0);
      }
    }
    adam.step(groups);
  }
  CHECK(parameter_hash(groups[1]) == frozen_hash);
  CHECK_FALSE(bitwise_equal(groups[0].params[0].tensor.data(), before_live));
}

TEST_CASE("identical inputs give bitwise identical outputs") {
  Rng a(9), b(9);
  const Tensor x = normal_tensor({5, 6}, 1.0, a, false);
  const Tensor y = normal_tensor({5, 6}, 1.0, b, false);
  const Tensor g1 = gelu(layer_norm(x, Tensor::full({6}, 1.0), Tensor::zeros({6})));
  const Tensor g2 = gelu(layer_norm(y, Tensor::full({6}, 1.0), Tensor::zeros({6})));
  CHECK(bitwise_equal(g1.data(), g2.data()));
}

TEST_CASE("random composed graphs pass the gradient check") {
  const auto report = testsupport::check_random_graphs(200, 20260101);
  INFO("worst " << report.worst << " at " << report.worst_what);
  CHECK(report.checked == 200);
  CHECK(report.failures == 0);
  CHECK(report.worst <= 1e-4);
}

TEST_CASE("full model loss passes the gradient check") {
  const auto report = testsupport::check_model_gradients(11);
  INFO("worst " << report.worst << " at " << report.worst_what);
  CHECK(report.checked > 10);
  CHECK(report.failures == 0);
}
