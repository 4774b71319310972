// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "omnifuse/numerics/tensor.hpp"

namespace omnifuse {

// Differentiable ops. Every op validates shapes, rejects non-finite inputs,
// and records a backward closure only when some input requires a gradient.

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Same-shape sum, or `b` of shape [n] added to every row of `a` (last dim n).
Tensor add(const Tensor& a, const Tensor& b);
/// Same-shape product, or `b` with a single element scaling all of `a`.
Tensor mul(const Tensor& a, const Tensor& b);
/// x * Phi(x) with the exact error-function CDF.
Tensor gelu(const Tensor& x);
/// Softmax over the last axis. With `causal`, the trailing two axes must be
/// square and entries above the diagonal are exactly zero.
Tensor softmax_lastdim(const Tensor& x, bool causal = false);
/// Non-overlapping mean over groups of `group` along `axis`; a trailing
/// partial group is averaged over its actual length.
Tensor mean_pool_axis(const Tensor& x, std::size_t axis, std::size_t group);
Tensor concat_axis(std::span<const Tensor> parts, std::size_t axis);
/// Rows of `table` ([V,d]) selected by `ids` -> [n,d].
Tensor embed_lookup(const Tensor& table, std::span<const std::size_t> ids);
/// Normalizes the last axis, then applies gain and bias of shape [d].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
/// Mean negative log-likelihood of `targets` under softmax(logits), logits [n,V].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

// Structural helpers.
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
/// Element `index` of the flattened tensor, as a [1] tensor.
Tensor select(const Tensor& x, std::size_t index);
/// Rows [begin, end) along the leading axis.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

enum class OpKind {
  kMatmul,
  kAdd,
  kMul,
  kGelu,
  kSoftmaxLastdim,
  kMeanPoolAxis,
  kConcatAxis,
  kEmbedLookup,
  kLayerNorm,
  kCrossEntropy,
};

struct OpArgs {
  std::size_t axis = 0;
  std::size_t group = 1;
  bool causal = false;
  double eps = 1e-5;
  std::vector<std::size_t> indices;  // embed ids or cross-entropy targets
};

const char* op_name(OpKind kind);

/// Uniform dispatch over the op kinds; used by graph-level tooling and tests.
Tensor op_forward(OpKind kind, std::span<const Tensor> inputs, const OpArgs& args = {});

}  // namespace omnifuse
