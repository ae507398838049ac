// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <memory>

#include "segloc/ops.hpp"
#include "test_util.hpp"

namespace segloc {
namespace {

using ag::Graph;
using ag::Var;
using testing::grad_check;
using testing::random_tensor;

// Contracts an arbitrary output with a fixed random tensor so every output
// element gets a distinct weight.
Var contract(Graph<double>& g, Var y) {
  Rng rng(99);
  const Tensor<double>& v = g.value(y);
  Tensor<double> c(v.shape());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.uniform(-1.0, 1.0);
  return ag::dot_const(g, y, c);
}

constexpr double kTol = 1e-6;

TEST(Autograd, LinearAndActivations) {
  Rng rng(1);
  const auto x = random_tensor({5, 4}, rng), w = random_tensor({4, 3}, rng), b = random_tensor({3}, rng);
  EXPECT_LT(grad_check({x, w, b}, [](Graph<double>& g, const std::vector<Var>& v) {
              return contract(g, ag::linear(g, v[0], v[1], v[2]));
            }), kTol);
  EXPECT_LT(grad_check({x}, [](Graph<double>& g, const std::vector<Var>& v) {
              return contract(g, ag::gelu(g, v[0]));
            }), kTol);
  // Values away from the kink.
  Tensor<double> r({6}, std::vector<double>{-0.9, -0.3, 0.2, 0.5, -0.1, 0.8});
  EXPECT_LT(grad_check({r}, [](Graph<double>& g, const std::vector<Var>& v) {
              return contract(g, ag::relu(g, v[0]));
            }), kTol);
}

TEST(Autograd, ElementwiseAndShapeOps) {
  Rng rng(2);
  const auto a = random_tensor({4, 3}, rng), b = random_tensor({4, 3}, rng);
  const auto c = random_tensor({4, 3}, rng);
  EXPECT_LT(grad_check({a, b}, [&](Graph<double>& g, const std::vector<Var>& v) {
              Var s = ag::add(g, v[0], ag::scale(g, v[1], -1.5));
              s = ag::add_const(g, s, c);
              s = ag::mask_rows(g, s, {1, 0, 1, 1});
              return contract(g, s);
            }), kTol);
  EXPECT_LT(grad_check({a, b}, [](Graph<double>& g, const std::vector<Var>& v) {
              Var cat = ag::concat_rows(g, {v[0], v[1]});
              Var mid = ag::slice_rows(g, cat, 2, 7);
              Var col = ag::slice_cols(g, mid, 1, 3);
              Var re = ag::reshape(g, col, {2, 5});
              return contract(g, ag::group_mean(g, ag::reshape(g, re, {5, 2}), 5));
            }), kTol);
  EXPECT_LT(grad_check({a}, [](Graph<double>& g, const std::vector<Var>& v) {
              auto idx = std::make_shared<const std::vector<int>>(std::vector<int>{3, -1, 0, 0, 2, 1});
              return contract(g, ag::gather_rows(g, v[0], idx, 2));
            }), kTol);
  EXPECT_LT(grad_check({a, b}, [](Graph<double>& g, const std::vector<Var>& v) {
              Var s0 = contract(g, v[0]), s1 = contract(g, ag::gelu(g, v[1]));
              return ag::weighted_sum(g, {s0, Var{}, s1}, {0.5, 9.0, -2.0});
            }), kTol);
}

TEST(Autograd, LayerNormAndAttention) {
  Rng rng(3);
  const auto x = random_tensor({5, 8}, rng), gm = random_tensor({8}, rng), bt = random_tensor({8}, rng);
  EXPECT_LT(grad_check({x, gm, bt}, [](Graph<double>& g, const std::vector<Var>& v) {
              return contract(g, ag::layer_norm(g, v[0], v[1], v[2]));
            }), kTol);
  const auto q = random_tensor({4, 8}, rng), k = random_tensor({6, 8}, rng), val = random_tensor({6, 8}, rng);
  for (const std::vector<std::uint8_t>& mask :
       {std::vector<std::uint8_t>{}, std::vector<std::uint8_t>{1, 0, 1, 1, 0, 1}}) {
    EXPECT_LT(grad_check({q, k, val}, [&](Graph<double>& g, const std::vector<Var>& v) {
                return contract(g, ag::attention(g, v[0], v[1], v[2], mask, 2));
              }), kTol);
  }
}

TEST(Autograd, AttentionIgnoresMaskedKeys) {
  Rng rng(4);
  const auto q = random_tensor({3, 4}, rng), k = random_tensor({5, 4}, rng), v = random_tensor({5, 4}, rng);
  auto k2 = k, v2 = v;
  for (int j = 0; j < 4; ++j) k2.at(4, j) = v2.at(4, j) = 123.0;
  Graph<double> g;
  const std::vector<std::uint8_t> mask{1, 1, 1, 1, 0};
  const auto& a = g.value(ag::attention(g, g.input(q), g.input(k), g.input(v), mask, 2));
  const auto& b = g.value(ag::attention(g, g.input(q), g.input(k2), g.input(v2), mask, 2));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  const auto& z = g.value(ag::attention(g, g.input(q), g.input(k), g.input(v), std::vector<std::uint8_t>(5, 0), 2));
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(z[i], 0.0);
}

TEST(Autograd, FrozenLeafAndAccumulation) {
  Tensor<double> w({2}, std::vector<double>{1.0, 2.0}), gw({2});
  Tensor<double> frozen({2}, std::vector<double>{3.0, 4.0});
  Graph<double> g;
  Var p = g.param(w, &gw);
  Var f = g.param(frozen, nullptr);
  EXPECT_FALSE(g.requires_grad(f));
  Var y = ag::add(g, ag::add(g, p, p), f);  // p used twice
  g.backward(ag::dot_const(g, y, Tensor<double>({2}, std::vector<double>{1.0, 1.0})));
  EXPECT_EQ(gw[0], 2.0);
  EXPECT_EQ(gw[1], 2.0);
}

TEST(Autograd, MeterCountsOwnedValuesOnly) {
  ag::ActivationMeter meter;
  Tensor<double> x({3, 4}, 1.0);
  {
    Graph<double> g(&meter);
    Var in = g.input(x);
    EXPECT_EQ(meter.live(), 0u);
    ag::scale(g, in, 2.0);
    EXPECT_EQ(meter.live(), 12u);
  }
  EXPECT_EQ(meter.live(), 0u);
  EXPECT_EQ(meter.peak(), 12u);
}

}  // namespace
}  // namespace segloc
