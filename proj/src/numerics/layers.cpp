// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/numerics/layers.hpp"

#include <cmath>

#include "omnifuse/numerics/ops.hpp"

namespace omnifuse {

std::uint64_t derive_seed(std::uint64_t base, std::string_view name) {
  std::uint64_t h = 14695981039346656037ULL ^ base;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // splitmix64 finaliser
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = stddev * dist(rng);
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, double gain)
    : weight(normal_tensor({in, out}, gain / std::sqrt(static_cast<double>(in)), rng)),
      bias(Tensor::zeros({out}, true)) {}

Tensor Linear::operator()(const Tensor& x) const { return add(matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Mlp2::Mlp2(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng, double out_gain)
    : first(in, hidden, rng), second(hidden, out, rng, out_gain) {}

Tensor Mlp2::operator()(const Tensor& x) const { return second(gelu(first(x))); }

void Mlp2::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  first.collect(prefix + ".fc1", out);
  second.collect(prefix + ".fc2", out);
}

LayerNormParams::LayerNormParams(std::size_t d)
    : gain(Tensor::full({d}, 1.0, true)), bias(Tensor::zeros({d}, true)) {}

Tensor LayerNormParams::operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }

void LayerNormParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

TransformerBlock::TransformerBlock(std::size_t d, std::size_t hidden, Rng& rng)
    : ln_attn(d),
      query(d, d, rng),
      key(d, d, rng),
      value(d, d, rng),
      out(d, d, rng),
      ln_mlp(d),
      mlp(d, hidden, d, rng) {}

Tensor TransformerBlock::operator()(const Tensor& x, bool causal) const {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(x.shape().back()));
  Tensor h = ln_attn(x);
  Tensor scores = scale(matmul(query(h), transpose(key(h))), inv_sqrt_d);
  Tensor attn = softmax_lastdim(scores, causal);
  Tensor y = add(x, out(matmul(attn, value(h))));
  return add(y, mlp(ln_mlp(y)));
}

void TransformerBlock::collect(const std::string& prefix, std::vector<NamedTensor>& out_params) const {
  ln_attn.collect(prefix + ".ln_attn", out_params);
  query.collect(prefix + ".query", out_params);
  key.collect(prefix + ".key", out_params);
  value.collect(prefix + ".value", out_params);
  out.collect(prefix + ".out", out_params);
  ln_mlp.collect(prefix + ".ln_mlp", out_params);
  mlp.collect(prefix + ".mlp", out_params);
}

}  // namespace omnifuse
