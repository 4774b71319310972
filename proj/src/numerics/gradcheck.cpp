// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace omnifuse {

namespace {

double finite_scalar(double v) {
  if (!std::isfinite(v)) throw NonFiniteError("finite_diff_grad: non-finite function value");
  return v;
}

}  // namespace

Tensor finite_diff_grad(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  if (!(eps > 0.0)) throw NumericsError("finite_diff_grad: eps must be positive");
  std::vector<double> base(x.data().begin(), x.data().end());
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    const double fp = finite_scalar(f(Tensor::from(x.shape(), std::move(plus))).item());
    const double fm = finite_scalar(f(Tensor::from(x.shape(), std::move(minus))).item());
    out[i] = (fp - fm) / (2.0 * eps);
  }
  return Tensor::from(x.shape(), std::move(out));
}

Tensor finite_diff_grad_inplace(const std::function<double()>& f, Tensor& x, double eps,
                                const std::vector<std::size_t>& indices) {
  if (!(eps > 0.0)) throw NumericsError("finite_diff_grad: eps must be positive");
  auto w = x.mutable_data();
  std::vector<double> out(w.size(), 0.0);
  auto probe = [&](std::size_t i) {
    const double orig = w[i];
    w[i] = orig + eps;
    const double fp = finite_scalar(f());
    w[i] = orig - eps;
    const double fm = finite_scalar(f());
    w[i] = orig;
    out[i] = (fp - fm) / (2.0 * eps);
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < w.size(); ++i) probe(i);
  } else {
    for (std::size_t i : indices) probe(i);
  }
  return Tensor::from(x.shape(), std::move(out));
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace omnifuse
