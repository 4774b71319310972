// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradcheck_suite.hpp"

#include <algorithm>
#include <random>

#include "omnifuse/numerics/gradcheck.hpp"
#include "omnifuse/numerics/ops.hpp"
#include "omnifuse/training/model.hpp"
#include "omnifuse/training/stages.hpp"

namespace omnifuse::testsupport {

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<std::size_t> random_ids(Rng& rng, std::size_t n, std::size_t bound) {
  std::vector<std::size_t> ids(n);
  for (auto& id : ids) id = pick(rng, 0, bound - 1);
  return ids;
}

enum Leaf { kX, kW, kBias, kGain, kShift, kTable, kExtra, kLeafCount };

}  // namespace

RandomGraph random_graph(Rng& rng) {
  const std::size_t n = pick(rng, 2, 6), m = pick(rng, 2, 8), k = pick(rng, 2, 8);
  constexpr std::size_t kVocab = 5;
  RandomGraph g;
  g.leaves.resize(kLeafCount);
  g.leaves[kX] = normal_tensor({n, m}, 1.0, rng);
  g.leaves[kW] = normal_tensor({m, k}, 0.5, rng);
  g.leaves[kBias] = normal_tensor({k}, 0.3, rng);
  g.leaves[kGain] = normal_tensor({k}, 0.2, rng);
  for (double& v : g.leaves[kGain].mutable_data()) v += 1.0;
  g.leaves[kShift] = normal_tensor({k}, 0.2, rng);
  g.leaves[kTable] = normal_tensor({kVocab, k}, 0.5, rng);
  g.leaves[kExtra] = normal_tensor({n, k}, 0.7, rng);

  const bool use_embed = pick(rng, 0, 1) == 1;
  const auto ids = random_ids(rng, n, kVocab);
  const std::size_t bias_kind = pick(rng, 0, 2);  // none, row bias, same-shape
  const std::size_t n_act = pick(rng, 1, 2);
  std::vector<std::size_t> acts;
  for (std::size_t i = 0; i < n_act; ++i) acts.push_back(pick(rng, 0, 5));
  const std::size_t structure = pick(rng, 0, 5);
  const std::size_t pool_axis = pick(rng, 0, 1), pool_group = pick(rng, 2, 3);
  const std::size_t head = pick(rng, 0, 2);
  const std::size_t target_seed = pick(rng, 0, 1u << 20);

  static const char* kActNames[] = {"gelu", "softmax", "layer_norm", "mul", "scalar_mul", "attention"};
  static const char* kStructNames[] = {"none", "mean_pool", "concat", "transpose", "reshape", "slice"};
  static const char* kHeadNames[] = {"sum", "sum_sq", "cross_entropy"};
  g.description = "n=" + std::to_string(n) + " m=" + std::to_string(m) + " k=" + std::to_string(k) +
                  (use_embed ? " embed" : "") + " bias=" + std::to_string(bias_kind);
  for (auto a : acts) g.description += std::string(" ") + kActNames[a];
  g.description += std::string(" ") + kStructNames[structure] + " " + kHeadNames[head];

  g.build = [=](const std::vector<Tensor>& L) {
    Tensor h = matmul(L[kX], L[kW]);
    if (use_embed) h = add(h, embed_lookup(L[kTable], ids));
    if (bias_kind == 1) h = add(h, L[kBias]);
    if (bias_kind == 2) h = add(h, L[kExtra]);
    for (auto a : acts) {
      switch (a) {
        case 0: h = gelu(h); break;
        case 1: h = softmax_lastdim(h); break;
        case 2: h = layer_norm(h, L[kGain], L[kShift]); break;
        case 3: h = mul(h, L[kExtra]); break;
        case 4: h = mul(h, select(L[kX], 0)); break;
        default: {
          const Tensor scores = scale(matmul(h, transpose(h)), 0.5);
          h = matmul(softmax_lastdim(scores, true), h);
        }
      }
    }
    switch (structure) {
      case 1: h = mean_pool_axis(h, pool_axis, pool_group); break;
      case 2: {
        const Tensor parts[] = {h, gelu(L[kExtra])};
        h = concat_axis(parts, pool_axis);
        break;
      }
      case 3: h = transpose(h); break;
      case 4: h = reshape(h, {h.dim(1), h.dim(0)}); break;
      case 5: h = slice_rows(h, 1, h.dim(0)); break;
      default: break;
    }
    if (head == 0) return sum(scale(h, 0.7));
    if (head == 1) return sum(mul(h, h));
    Rng trng(target_seed);
    const auto targets = random_ids(trng, h.dim(0), h.dim(1));
    return cross_entropy(h, targets);
  };
  return g;
}

GradReport check_graph(const RandomGraph& graph, double tol, double eps) {
  GradReport report;
  report.checked = 1;
  for (const auto& leaf : graph.leaves) {
    Tensor t = leaf;
    t.zero_grad();
  }
  backward(graph.build(graph.leaves));
  for (std::size_t i = 0; i < graph.leaves.size(); ++i) {
    Tensor leaf = graph.leaves[i];
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    const Tensor numeric =
        finite_diff_grad_inplace([&] { return graph.build(graph.leaves).item(); }, leaf, eps);
    const double err = max_relative_error(analytic, numeric.data());
    report.entries += analytic.size();
    if (err > report.worst) {
      report.worst = err;
      report.worst_what = graph.description + " leaf " + std::to_string(i);
    }
  }
  if (report.worst > tol) report.failures = 1;
  return report;
}

GradReport check_random_graphs(std::size_t count, std::uint64_t seed, double tol) {
  GradReport total;
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const RandomGraph g = random_graph(rng);
    const GradReport r = check_graph(g, tol);
    total.checked += r.checked;
    total.entries += r.entries;
    total.failures += r.failures;
    if (r.worst >= total.worst) {
      total.worst = r.worst;
      total.worst_what = "graph " + std::to_string(i) + ": " + r.worst_what;
    }
  }
  return total;
}

GradReport check_model_gradients(std::uint64_t seed, std::size_t per_tensor, double tol) {
  training::ModelConfig config;
  config.input_size = 16;
  config.patch = 4;
  config.target_grid = 2;
  config.d_enc = 8;
  config.d_model = 8;
  config.d_text = 8;
  config.d_hidden = 8;
  config.d_audio = 8;
  config.placeholder_len = 2;
  config.decoder_layers = 1;
  config.decoder_hidden = 16;
  config.max_len = 96;
  config.seed = seed;
  training::OmniModel model(config);

  training::DataSpec spec;
  spec.per_family = 1;
  spec.frames = 2;
  spec.av_fraction = 1.0;
  spec.blank_prob = 0.0;
  spec.audio_seconds = 0.2;
  const auto samples = training::make_synthetic_dataset(spec, seed);
  const auto& sample = samples.front();
  const auto prepared = model.prepare(sample.id, sample.clip, sample.wave ? &*sample.wave : nullptr,
                                      sample.instruction, sample.answer, sample.family);

  training::apply_freeze(model, training::StageConfig::defaults({training::StageKind::kCrossmodal}));
  const auto mode = training::FusionMode::gate();
  const auto directive = sequence::Directive::kVideoAudio;
  auto loss_value = [&] { return model.loss(prepared, directive, mode).item(); };

  for (auto& g : model.groups()) g.zero_grad();
  backward(model.loss(prepared, directive, mode));

  GradReport report;
  Rng rng(derive_seed(seed, "gradcheck/indices"));
  for (auto& g : model.groups()) {
    if (g.frozen) continue;
    for (auto& p : g.params) {
      const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < std::min(per_tensor, analytic.size()); ++i) {
        idx.push_back(pick(rng, 0, analytic.size() - 1));
      }
      const Tensor numeric = finite_diff_grad_inplace(loss_value, p.tensor, 1e-5, idx);
      std::vector<double> a, b;
      for (auto i : idx) {
        a.push_back(analytic[i]);
        b.push_back(numeric[i]);
      }
      const double err = max_relative_error(a, b);
      ++report.checked;
      report.entries += idx.size();
      if (err > tol) ++report.failures;
      if (err >= report.worst) {
        report.worst = err;
        report.worst_what = g.name + "/" + p.name;
      }
    }
  }
  return report;
}

}  // namespace omnifuse::testsupport
