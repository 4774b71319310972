// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "omnifuse/numerics/optim.hpp"
#include "omnifuse/numerics/tensor.hpp"

namespace omnifuse {

using Rng = std::mt19937_64;

/// Stable per-name seed so that independently named modules drawn from the
/// same base seed get independent weights.
std::uint64_t derive_seed(std::uint64_t base, std::string_view name);

/// Leaf of i.i.d. N(0, stddev^2) entries.
Tensor normal_tensor(Shape shape, double stddev, Rng& rng, bool requires_grad = true);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// linear -> GeLU -> linear.
struct Mlp2 {
  Linear first;
  Linear second;

  Mlp2() = default;
  Mlp2(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, double out_gain = 1.0);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  LayerNormParams() = default;
  explicit LayerNormParams(std::size_t d);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Pre-norm single-head transformer block. `causal` masks future positions.
struct TransformerBlock {
  LayerNormParams ln_attn;
  Linear query;
  Linear key;
  Linear value;
  Linear out;
  LayerNormParams ln_mlp;
  Mlp2 mlp;

  TransformerBlock() = default;
  TransformerBlock(std::size_t d, std::size_t hidden, Rng& rng);

  Tensor operator()(const Tensor& x, bool causal) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

}  // namespace omnifuse
