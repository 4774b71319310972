// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace omnifuse {

namespace {

using detail::Node;
using BackwardFn = std::function<void(Node&)>;

void require_inputs(std::initializer_list<const Tensor*> inputs, const char* op) {
  for (const Tensor* t : inputs) {
    if (!t->defined()) throw NumericsError(std::string(op) + ": undefined input");
    check_finite(t->data(), op);
  }
}

Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<std::shared_ptr<Node>> inputs, BackwardFn backward,
                   const char* op) {
  check_finite(values, op);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->leaf = false;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in->requires_grad;
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Strides for viewing a tensor as [outer, extent(axis), inner].
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_inputs({&a, &b}, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result(
      {m, n}, std::move(out), {a.node(), b.node()},
      [m, k, n](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        const double* g = self.grad.data();
        if (na.requires_grad) {
          double* ga = na.grad.data();
          const double* pb = nb.data.data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              const double* brow = pb + p * n;
              const double* grow = g + i * n;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[i * k + p] += acc;
            }
          }
        }
        if (nb.requires_grad) {
          double* gb = nb.grad.data();
          const double* pa = na.data.data();
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double av = pa[i * k + p];
              if (av == 0.0) continue;
              double* gbrow = gb + p * n;
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
          }
        }
      },
      "matmul");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_inputs({&a, &b}, "add");
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_result(
        a.shape(), std::move(out), {a.node(), b.node()},
        [](Node& self) {
          for (auto& in : self.inputs) {
            if (!in->requires_grad) continue;
            for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
          }
        },
        "add");
  }
  if (b.rank() == 1 && a.shape().back() == b.dim(0)) {
    const std::size_t n = b.dim(0);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i % n];
    return make_result(
        a.shape(), std::move(out), {a.node(), b.node()},
        [n](Node& self) {
          Node& na = *self.inputs[0];
          Node& nb = *self.inputs[1];
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (na.requires_grad) na.grad[i] += self.grad[i];
            if (nb.requires_grad) nb.grad[i % n] += self.grad[i];
          }
        },
        "add");
  }
  throw ShapeError("add: incompatible shapes " + shape_str(a.shape()) + " + " +
                   shape_str(b.shape()));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_inputs({&a, &b}, "mul");
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result(
        a.shape(), std::move(out), {a.node(), b.node()},
        [](Node& self) {
          Node& na = *self.inputs[0];
          Node& nb = *self.inputs[1];
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (na.requires_grad) na.grad[i] += self.grad[i] * nb.data[i];
            if (nb.requires_grad) nb.grad[i] += self.grad[i] * na.data[i];
          }
        },
        "mul");
  }
  if (b.numel() == 1) {
    const double s = b[0];
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
    return make_result(
        a.shape(), std::move(out), {a.node(), b.node()},
        [](Node& self) {
          Node& na = *self.inputs[0];
          Node& nb = *self.inputs[1];
          const double s = nb.data[0];
          double acc = 0.0;
          for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (na.requires_grad) na.grad[i] += self.grad[i] * s;
            acc += self.grad[i] * na.data[i];
          }
          if (nb.requires_grad) nb.grad[0] += acc;
        },
        "mul");
  }
  throw ShapeError("mul: incompatible shapes " + shape_str(a.shape()) + " * " +
                   shape_str(b.shape()));
}

Tensor gelu(const Tensor& x) {
  require_inputs({&x}, "gelu");
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * normal_cdf(x[i]);
  return make_result(
      x.shape(), std::move(out), {x.node()},
      [](Node& self) {
        Node& nx = *self.inputs[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const double v = nx.data[i];
          nx.grad[i] += self.grad[i] * (normal_cdf(v) + v * normal_pdf(v));
        }
      },
      "gelu");
}

Tensor softmax_lastdim(const Tensor& x, bool causal) {
  require_inputs({&x}, "softmax_lastdim");
  const Shape& s = x.shape();
  const std::size_t n = s.back();
  const std::size_t rows = x.numel() / n;
  if (causal && (s.size() < 2 || s[s.size() - 2] != n)) {
    throw ShapeError("softmax_lastdim: causal mask needs square trailing axes, got " +
                     shape_str(s));
  }
  std::vector<double> out(x.numel(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    // Row r sits at query position r % n when causal.
    const std::size_t width = causal ? (r % n) + 1 : n;
    const double* in = x.data().data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < width; ++j) o[j] /= total;
  }
  return make_result(
      s, std::move(out), {x.node()},
      [n, rows](Node& self) {
        Node& nx = *self.inputs[0];
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = self.data.data() + r * n;
          const double* g = self.grad.data() + r * n;
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += y[j] * g[j];
          double* gx = nx.grad.data() + r * n;
          for (std::size_t j = 0; j < n; ++j) gx[j] += y[j] * (g[j] - dot);
        }
      },
      "softmax_lastdim");
}

Tensor mean_pool_axis(const Tensor& x, std::size_t axis, std::size_t group) {
  require_inputs({&x}, "mean_pool_axis");
  if (axis >= x.rank()) throw ShapeError("mean_pool_axis: axis out of range");
  if (group == 0) throw ShapeError("mean_pool_axis: group must be positive");
  const AxisView v = axis_view(x.shape(), axis);
  const std::size_t pooled = (v.extent + group - 1) / group;
  Shape out_shape = x.shape();
  out_shape[axis] = pooled;
  std::vector<double> out(v.outer * pooled * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t e = 0; e < v.extent; ++e) {
      const std::size_t g = e / group;
      const std::size_t count = std::min(group, v.extent - g * group);
      const double w = 1.0 / static_cast<double>(count);
      const double* src = x.data().data() + (o * v.extent + e) * v.inner;
      double* dst = out.data() + (o * pooled + g) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) dst[i] += w * src[i];
    }
  }
  return make_result(
      std::move(out_shape), std::move(out), {x.node()},
      [v, pooled, group](Node& self) {
        Node& nx = *self.inputs[0];
        for (std::size_t o = 0; o < v.outer; ++o) {
          for (std::size_t e = 0; e < v.extent; ++e) {
            const std::size_t g = e / group;
            const std::size_t count = std::min(group, v.extent - g * group);
            const double w = 1.0 / static_cast<double>(count);
            double* dst = nx.grad.data() + (o * v.extent + e) * v.inner;
            const double* src = self.grad.data() + (o * pooled + g) * v.inner;
            for (std::size_t i = 0; i < v.inner; ++i) dst[i] += w * src[i];
          }
        }
      },
      "mean_pool_axis");
}

Tensor concat_axis(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat_axis: no inputs");
  for (const Tensor& p : parts) require_inputs({&p}, "concat_axis");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat_axis: axis out of range");
  std::size_t total = 0;
  std::vector<std::size_t> extents;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat_axis: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw ShapeError("concat_axis: shape mismatch " + shape_str(first) + " vs " +
                         shape_str(s));
      }
    }
    extents.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  const AxisView base = axis_view(first, axis);
  std::vector<double> out(base.outer * total * base.inner);
  std::vector<std::shared_ptr<Node>> inputs;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].data().data();
    const std::size_t block = extents[k] * base.inner;
    for (std::size_t o = 0; o < base.outer; ++o) {
      std::copy_n(src + o * block, block, out.data() + (o * total + offset) * base.inner);
    }
    offset += extents[k];
    inputs.push_back(parts[k].node());
  }
  return make_result(
      std::move(out_shape), std::move(out), std::move(inputs),
      [extents, total, base](Node& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
          Node& in = *self.inputs[k];
          const std::size_t block = extents[k] * base.inner;
          if (in.requires_grad) {
            for (std::size_t o = 0; o < base.outer; ++o) {
              const double* src = self.grad.data() + (o * total + offset) * base.inner;
              double* dst = in.grad.data() + o * block;
              for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
            }
          }
          offset += extents[k];
        }
      },
      "concat_axis");
}

Tensor embed_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  require_inputs({&table}, "embed_lookup");
  if (table.rank() != 2) throw ShapeError("embed_lookup: table must be 2-D");
  if (ids.empty()) throw ShapeError("embed_lookup: no ids");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  std::vector<double> out(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= vocab) {
      throw ShapeError("embed_lookup: id " + std::to_string(rows[r]) +
                       " out of range for table of " + std::to_string(vocab));
    }
    std::copy_n(table.data().data() + rows[r] * d, d, out.data() + r * d);
  }
  const std::size_t n = rows.size();
  return make_result(
      {n, d}, std::move(out), {table.node()},
      [rows = std::move(rows), d](Node& self) {
        Node& nt = *self.inputs[0];
        for (std::size_t r = 0; r < rows.size(); ++r) {
          double* dst = nt.grad.data() + rows[r] * d;
          const double* src = self.grad.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
      },
      "embed_lookup");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_inputs({&x, &gain, &bias}, "layer_norm");
  const std::size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gain/bias must have shape (" + std::to_string(d) + ")");
  }
  const std::size_t rows = x.numel() / d;
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data().data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (in[j] - mean) * inv_std[r];
      xhat[r * d + j] = h;
      out[r * d + j] = h * gain[j] + bias[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& nx = *self.inputs[0];
        Node& ng = *self.inputs[1];
        Node& nb = *self.inputs[2];
        std::vector<double> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = self.grad.data() + r * d;
          const double* h = xhat.data() + r * d;
          double mean_d = 0.0, mean_dh = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            if (ng.requires_grad) ng.grad[j] += g[j] * h[j];
            if (nb.requires_grad) nb.grad[j] += g[j];
            dxhat[j] = g[j] * ng.data[j];
            mean_d += dxhat[j];
            mean_dh += dxhat[j] * h[j];
          }
          if (!nx.requires_grad) continue;
          mean_d /= static_cast<double>(d);
          mean_dh /= static_cast<double>(d);
          double* gx = nx.grad.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            gx[j] += inv_std[r] * (dxhat[j] - mean_d - h[j] * mean_dh);
          }
        }
      },
      "layer_norm");
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  require_inputs({&logits}, "cross_entropy");
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  const std::size_t n = logits.dim(0), classes = logits.dim(1);
  std::vector<double> probs(logits.numel());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] >= classes) throw ShapeError("cross_entropy: target out of range");
    const double* in = logits.data().data() + r * classes;
    const double mx = *std::max_element(in, in + classes);
    double total = 0.0;
    for (std::size_t j = 0; j < classes; ++j) total += std::exp(in[j] - mx);
    const double log_z = mx + std::log(total);
    for (std::size_t j = 0; j < classes; ++j) probs[r * classes + j] = std::exp(in[j] - log_z);
    loss += log_z - in[targets[r]];
  }
  loss /= static_cast<double>(n);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_result(
      {1}, {loss}, {logits.node()},
      [probs = std::move(probs), tgt = std::move(tgt), n, classes](Node& self) {
        Node& nl = *self.inputs[0];
        const double g = self.grad[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t j = 0; j < classes; ++j) {
            const double onehot = (j == tgt[r]) ? 1.0 : 0.0;
            nl.grad[r * classes + j] += g * (probs[r * classes + j] - onehot);
          }
        }
      },
      "cross_entropy");
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_inputs({&x}, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(
      std::move(shape), std::move(out), {x.node()},
      [](Node& self) {
        Node& nx = *self.inputs[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i];
      },
      "reshape");
}

Tensor transpose(const Tensor& x) {
  require_inputs({&x}, "transpose");
  if (x.rank() != 2) throw ShapeError("transpose: expects a 2-D tensor");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  }
  return make_result(
      {n, m}, std::move(out), {x.node()},
      [m, n](Node& self) {
        Node& nx = *self.inputs[0];
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) nx.grad[i * n + j] += self.grad[j * m + i];
        }
      },
      "transpose");
}

Tensor sum(const Tensor& x) {
  require_inputs({&x}, "sum");
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result(
      {1}, {total}, {x.node()},
      [](Node& self) {
        Node& nx = *self.inputs[0];
        for (double& g : nx.grad) g += self.grad[0];
      },
      "sum");
}

Tensor scale(const Tensor& x, double factor) {
  require_inputs({&x}, "scale");
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return make_result(
      x.shape(), std::move(out), {x.node()},
      [factor](Node& self) {
        Node& nx = *self.inputs[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += factor * self.grad[i];
      },
      "scale");
}

Tensor select(const Tensor& x, std::size_t index) {
  require_inputs({&x}, "select");
  if (index >= x.numel()) throw ShapeError("select: index out of range");
  return make_result(
      {1}, {x[index]}, {x.node()},
      [index](Node& self) { self.inputs[0]->grad[index] += self.grad[0]; }, "select");
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_inputs({&x}, "slice_rows");
  if (begin >= end || end > x.dim(0)) {
    throw ShapeError("slice_rows: bad range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") for " + shape_str(x.shape()));
  }
  const std::size_t row = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  std::vector<double> out(x.data().begin() + begin * row, x.data().begin() + end * row);
  return make_result(
      std::move(shape), std::move(out), {x.node()},
      [begin, row](Node& self) {
        double* dst = self.inputs[0]->grad.data() + begin * row;
        for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
      },
      "slice_rows");
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kGelu: return "gelu";
    case OpKind::kSoftmaxLastdim: return "softmax_lastdim";
    case OpKind::kMeanPoolAxis: return "mean_pool_axis";
    case OpKind::kConcatAxis: return "concat_axis";
    case OpKind::kEmbedLookup: return "embed_lookup";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kCrossEntropy: return "cross_entropy";
  }
  return "unknown";
}

Tensor op_forward(OpKind kind, std::span<const Tensor> inputs, const OpArgs& args) {
  auto arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ShapeError(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                       " inputs, got " + std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::kMatmul: arity(2); return matmul(inputs[0], inputs[1]);
    case OpKind::kAdd: arity(2); return add(inputs[0], inputs[1]);
    case OpKind::kMul: arity(2); return mul(inputs[0], inputs[1]);
    case OpKind::kGelu: arity(1); return gelu(inputs[0]);
    case OpKind::kSoftmaxLastdim: arity(1); return softmax_lastdim(inputs[0], args.causal);
    case OpKind::kMeanPoolAxis: arity(1); return mean_pool_axis(inputs[0], args.axis, args.group);
    case OpKind::kConcatAxis: return concat_axis(inputs, args.axis);
    case OpKind::kEmbedLookup: arity(1); return embed_lookup(inputs[0], args.indices);
    case OpKind::kLayerNorm: arity(3); return layer_norm(inputs[0], inputs[1], inputs[2], args.eps);
    case OpKind::kCrossEntropy: arity(1); return cross_entropy(inputs[0], args.indices);
  }
  throw NumericsError("op_forward: unknown op kind");
}

}  // namespace omnifuse
