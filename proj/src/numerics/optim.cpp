// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/numerics/optim.hpp"

#include <cmath>
#include <cstring>

namespace omnifuse {

void ParamGroup::zero_grad() {
  for (auto& p : params) p.tensor.zero_grad();
}

std::size_t ParamGroup::numel() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

void Adam::step(std::span<ParamGroup> groups) {
  const auto& o = options_;
  for (ParamGroup& group : groups) {
    if (group.frozen) continue;
    for (NamedTensor& p : group.params) {
      if (!p.tensor.has_grad()) {
        throw NumericsError("adam: missing gradient on trainable tensor " + group.name + "." +
                            p.name);
      }
      Moments& st = state_[p.tensor.id()];
      if (st.m.empty()) {
        st.m.assign(p.tensor.numel(), 0.0);
        st.v.assign(p.tensor.numel(), 0.0);
      }
      ++st.t;
      const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(st.t));
      const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(st.t));
      auto w = p.tensor.mutable_data();
      auto g = p.tensor.grad();
      for (std::size_t i = 0; i < w.size(); ++i) {
        st.m[i] = o.beta1 * st.m[i] + (1.0 - o.beta1) * g[i];
        st.v[i] = o.beta2 * st.v[i] + (1.0 - o.beta2) * g[i] * g[i];
        const double m_hat = st.m[i] / c1;
        const double v_hat = st.v[i] / c2;
        w[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
      }
    }
  }
}

void adam_step(Adam& optimizer, std::span<ParamGroup> groups) { optimizer.step(groups); }

namespace {

void fnv_mix(std::uint64_t& h, std::span<const double> values) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
}

}  // namespace

std::uint64_t parameter_hash(std::span<const ParamGroup> groups) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const ParamGroup& g : groups) {
    for (const auto& p : g.params) fnv_mix(h, p.tensor.data());
  }
  return h;
}

std::uint64_t parameter_hash(const ParamGroup& group) {
  return parameter_hash(std::span<const ParamGroup>(&group, 1));
}

}  // namespace omnifuse
