// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "omnifuse/numerics/tensor.hpp"

namespace omnifuse {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// A named set of parameters frozen or trained together.
struct ParamGroup {
  std::string name;
  std::vector<NamedTensor> params;
  bool frozen = false;

  void zero_grad();
  std::size_t numel() const;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are keyed by tensor identity and
/// persist across steps; frozen groups are skipped entirely.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<ParamGroup> groups);
  void set_lr(double lr) { options_.lr = lr; }
  const AdamOptions& options() const { return options_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;
  };

  AdamOptions options_;
  std::unordered_map<const void*, Moments> state_;
};

/// Free-function form of a single Adam update against an external state.
void adam_step(Adam& optimizer, std::span<ParamGroup> groups);

/// 64-bit FNV-1a over the raw bytes of every tensor in the given groups.
std::uint64_t parameter_hash(std::span<const ParamGroup> groups);
std::uint64_t parameter_hash(const ParamGroup& group);

}  // namespace omnifuse
