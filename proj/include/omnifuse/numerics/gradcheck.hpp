// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "omnifuse/numerics/tensor.hpp"

namespace omnifuse {

/// Central-difference gradient of a scalar function at `x`. `f` receives a
/// perturbed detached copy of `x` on every call.
Tensor finite_diff_grad(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                        double eps = 1e-5);

/// Same estimate for a leaf that lives inside a larger computation (a model
/// parameter): `x` is perturbed in place, `f` re-evaluates the loss, and the
/// original values are restored. Only elements listed in `indices` are
/// estimated when it is non-empty; other entries are left at zero.
Tensor finite_diff_grad_inplace(const std::function<double()>& f, Tensor& x,
                                double eps = 1e-5,
                                const std::vector<std::size_t>& indices = {});

/// Elementwise |a - b| / max(|a|, |b|, floor), maximised over all entries.
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-6);

}  // namespace omnifuse
