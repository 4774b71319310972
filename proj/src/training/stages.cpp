// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/training/stages.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "omnifuse/numerics/ops.hpp"

namespace omnifuse::training {

using sequence::Directive;
using visual::BranchId;

std::string StageId::name() const {
  switch (kind) {
    case StageKind::kBranchPretrain:
      return "branch_pretrain(" + std::string(visual::branch_name(branch)) + ")";
    case StageKind::kVisualFinetune: return "visual_finetune";
    case StageKind::kAudioAlign: return "audio_align";
    case StageKind::kCrossmodal: return "crossmodal";
  }
  return "?";
}

std::string StageId::checkpoint_stem() const {
  if (kind == StageKind::kBranchPretrain) {
    return "branch_" + std::string(visual::branch_name(branch));
  }
  return name();
}

StageId parse_stage(std::string_view name) {
  if (name == "visual_finetune") return {StageKind::kVisualFinetune};
  if (name == "audio_align") return {StageKind::kAudioAlign};
  if (name == "crossmodal") return {StageKind::kCrossmodal};
  constexpr std::string_view prefix = "branch_pretrain(";
  if (name.starts_with(prefix) && name.ends_with(")")) {
    const auto inner = name.substr(prefix.size(), name.size() - prefix.size() - 1);
    return {StageKind::kBranchPretrain, visual::parse_branch(inner)};
  }
  if (name.starts_with("branch_")) {
    return {StageKind::kBranchPretrain, visual::parse_branch(name.substr(7))};
  }
  throw TrainingError("unknown stage '" + std::string(name) + "'");
}

std::vector<StageId> all_stages() {
  return {{StageKind::kBranchPretrain, BranchId::kFace},
          {StageKind::kBranchPretrain, BranchId::kBody},
          {StageKind::kBranchPretrain, BranchId::kInteraction},
          {StageKind::kVisualFinetune},
          {StageKind::kAudioAlign},
          {StageKind::kCrossmodal}};
}

std::set<std::string> scheduled_trainable(const StageId& stage) {
  switch (stage.kind) {
    case StageKind::kBranchPretrain: return {std::string(projector_group(stage.branch))};
    case StageKind::kVisualFinetune:
      return {"proj_face", "proj_body", "proj_inter", "decoder", "weight_mlps", "special_tokens"};
    case StageKind::kAudioAlign: return {"proj_audio"};
    case StageKind::kCrossmodal:
      return {"decoder",    "proj_face",   "proj_body",     "proj_inter",
              "proj_audio", "weight_mlps", "special_tokens"};
  }
  return {};
}

std::vector<std::string> required_parents(const StageId& stage) {
  switch (stage.kind) {
    case StageKind::kBranchPretrain: return {};
    case StageKind::kVisualFinetune: return {"branch_face", "branch_body", "branch_interaction"};
    case StageKind::kAudioAlign: return {"visual_finetune"};
    case StageKind::kCrossmodal: return {"visual_finetune", "audio_align"};
  }
  return {};
}

StageConfig StageConfig::defaults(const StageId& stage) {
  StageConfig c;
  c.stage = stage;
  c.trainable_groups = scheduled_trainable(stage);
  switch (stage.kind) {
    case StageKind::kBranchPretrain:
      c.data.families = {stage.branch};
      c.data.per_family = 200;
      c.steps = 600;
      c.lr = 3e-3;
      break;
    case StageKind::kVisualFinetune:
      c.data.per_family = 200;
      c.steps = 1400;
      c.lr = 2e-3;
      break;
    case StageKind::kAudioAlign:
      c.data.per_family = 30;
      c.data.av_fraction = 1.0;
      c.data.blank_prob = 0.0;
      c.steps = 150;
      c.lr = 3e-3;
      break;
    case StageKind::kCrossmodal:
      c.data.per_family = 60;
      c.data.av_fraction = 0.5;
      c.data.blank_prob = 0.5;
      c.steps = 400;
      c.lr = 1e-3;
      break;
  }
  return c;
}

void apply_freeze(OmniModel& model, const StageConfig& stage) {
  for (const auto& name : stage.trainable_groups) {
    if (!is_group_name(name)) throw TrainingError("unknown parameter group '" + name + "'");
  }
  if (stage.trainable_groups != scheduled_trainable(stage.stage)) {
    throw TrainingError("trainable groups for " + stage.stage.name() +
                        " do not match the training schedule");
  }
  for (auto& g : model.groups()) {
    g.frozen = stage.trainable_groups.count(g.name) == 0;
    for (auto& p : g.params) p.tensor.set_requires_grad(!g.frozen);
  }
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "step,loss,lr,frozen_hash\n";
  char hash[17];
  for (const auto& r : rows) {
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.frozen_hash));
    out << r.step << ',' << r.loss << ',' << r.lr << ',' << hash << '\n';
  }
}

std::vector<double> TrainLog::smoothed(std::size_t window) const {
  std::vector<double> out(rows.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    acc += rows[i].loss;
    if (i >= window) acc -= rows[i - window].loss;
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

SampleView stage_view(const StageId& stage, const SyntheticSample& sample) {
  switch (stage.kind) {
    case StageKind::kBranchPretrain: return {Directive::kVideo, FusionMode::only(stage.branch)};
    case StageKind::kVisualFinetune: return {Directive::kVideo, FusionMode::gate()};
    case StageKind::kAudioAlign: return {Directive::kAudio, FusionMode::gate()};
    case StageKind::kCrossmodal:
      return {sample.has_audio ? Directive::kVideoAudio : Directive::kVideo, FusionMode::gate()};
  }
  return {};
}

std::vector<PreparedSample> prepare_all(const OmniModel& model,
                                        const std::vector<SyntheticSample>& samples) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back(model.prepare(s.id, s.clip, s.wave ? &*s.wave : nullptr, s.instruction, s.answer,
                                s.family));
  }
  return out;
}

namespace {

std::uint64_t frozen_hash(const OmniModel& model) {
  std::vector<ParamGroup> frozen;
  for (const auto& g : model.groups()) {
    if (g.frozen) frozen.push_back(g);
  }
  return parameter_hash(std::span<const ParamGroup>(frozen));
}

void assert_freeze(const OmniModel& model, std::size_t step) {
  for (const auto& g : model.groups()) {
    if (!g.frozen) continue;
    for (const auto& p : g.params) {
      if (p.tensor.requires_grad() || p.tensor.has_grad()) {
        throw TrainingError("freeze violated at step " + std::to_string(step) + ": " + g.name +
                            "." + p.name + " carries a gradient");
      }
    }
  }
}

}  // namespace

TrainLog train_steps(OmniModel& model, const StageConfig& stage,
                     const std::vector<SyntheticSample>& samples,
                     const std::vector<PreparedSample>& prepared, std::size_t steps) {
  if (samples.empty() || samples.size() != prepared.size()) {
    throw TrainingError("train: sample and prepared lists must be non-empty and aligned");
  }
  if (stage.batch == 0) throw TrainingError("train: batch must be positive");
  if (!(stage.lr > 0.0)) throw TrainingError("train: lr must be positive");
  apply_freeze(model, stage);

  Adam optimizer(AdamOptions{stage.lr});
  Rng rng(derive_seed(stage.seed, "order"));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  TrainLog log;
  auto& groups = model.groups();
  for (std::size_t step = 0; step < steps; ++step) {
    for (auto& g : groups) {
      if (!g.frozen) g.zero_grad();
    }
    double total = 0.0;
    for (std::size_t b = 0; b < stage.batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      const SampleView view = stage_view(stage.stage, samples[idx]);
      try {
        Tensor loss = model.loss(prepared[idx], view.directive, view.mode);
        total += loss.item();
        backward(scale(loss, 1.0 / static_cast<double>(stage.batch)));
      } catch (const NonFiniteError& e) {
        throw TrainingError(stage.stage.name() + ": non-finite value at step " +
                            std::to_string(step) + " on sample " + samples[idx].id + ": " +
                            e.what());
      }
    }
    assert_freeze(model, step);
    optimizer.step(groups);
    log.rows.push_back(
        {step, total / static_cast<double>(stage.batch), stage.lr, frozen_hash(model)});
  }
  return log;
}

double accuracy(const OmniModel& model, const std::vector<SyntheticSample>& samples,
                const std::vector<PreparedSample>& prepared, Directive directive,
                FusionMode mode) {
  if (samples.empty()) throw TrainingError("accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    hits += model.predict(prepared[i], directive, mode) == prepared[i].answer_ids.front();
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

double stage_accuracy(const OmniModel& model, const StageId& stage,
                      const std::vector<SyntheticSample>& samples,
                      const std::vector<PreparedSample>& prepared) {
  if (samples.empty()) throw TrainingError("accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SampleView view = stage_view(stage, samples[i]);
    hits += model.predict(prepared[i], view.directive, view.mode) ==
            prepared[i].answer_ids.front();
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

StageData make_stage_data(const StageConfig& stage) {
  StageData data;
  data.train = make_synthetic_dataset(stage.data, derive_seed(stage.seed, "train"));
  DataSpec held = stage.data;
  held.per_family = stage.heldout_per_family;
  // The modality comparison needs every held-out sample to carry audio.
  if (stage.stage.kind == StageKind::kCrossmodal) held.av_fraction = 1.0;
  data.heldout = make_synthetic_dataset(held, derive_seed(stage.seed, "heldout"));
  return data;
}

StageResult run_stage(OmniModel& model, const StageConfig& stage, const StageData& data,
                      const std::filesystem::path& checkpoint_dir) {
  auto ckpt = [&](const std::string& stem) { return checkpoint_dir / (stem + ".ckpt"); };
  std::vector<std::string> lineage;
  for (const auto& parent : required_parents(stage.stage)) {
    if (!std::filesystem::exists(ckpt(parent))) {
      throw TrainingError(stage.stage.name() + " requires checkpoint " + ckpt(parent).string() +
                          " (missing)");
    }
    for (const auto& ancestor : read_checkpoint_meta(ckpt(parent)).lineage) {
      if (std::find(lineage.begin(), lineage.end(), ancestor) == lineage.end()) {
        lineage.push_back(ancestor);
      }
    }
    lineage.push_back(parent);
  }
  switch (stage.stage.kind) {
    case StageKind::kBranchPretrain: break;
    case StageKind::kVisualFinetune:
      for (BranchId b : visual::kAllBranches) {
        load_checkpoint(ckpt("branch_" + std::string(visual::branch_name(b))), model,
                        {std::string(projector_group(b))});
      }
      break;
    case StageKind::kAudioAlign: load_checkpoint(ckpt("visual_finetune"), model); break;
    case StageKind::kCrossmodal:
      load_checkpoint(ckpt("visual_finetune"), model);
      load_checkpoint(ckpt("audio_align"), model, {"proj_audio"});
      break;
  }

  StageResult result;
  apply_freeze(model, stage);
  result.frozen_hash_before = frozen_hash(model);
  const auto train_prepared = prepare_all(model, data.train);
  result.log = train_steps(model, stage, data.train, train_prepared, stage.steps);
  result.frozen_hash_after = frozen_hash(model);
  if (result.frozen_hash_after != result.frozen_hash_before) {
    throw TrainingError(stage.stage.name() + ": frozen parameters changed during training");
  }

  const auto held_prepared = prepare_all(model, data.heldout);
  result.heldout_accuracy = stage_accuracy(model, stage.stage, data.heldout, held_prepared);
  if (stage.stage.kind == StageKind::kCrossmodal) {
    std::vector<SyntheticSample> av;
    std::vector<PreparedSample> av_prepared;
    for (std::size_t i = 0; i < data.heldout.size(); ++i) {
      if (!data.heldout[i].has_audio) continue;
      av.push_back(data.heldout[i]);
      av_prepared.push_back(held_prepared[i]);
    }
    if (!av.empty()) {
      ModalityReport m;
      m.video_audio = accuracy(model, av, av_prepared, Directive::kVideoAudio, FusionMode::gate());
      m.video_only = accuracy(model, av, av_prepared, Directive::kVideo, FusionMode::gate());
      m.chance = 1.0 / static_cast<double>(stage.data.classes);
      result.modality = m;
    }
  }

  result.checkpoint = ckpt(stage.stage.checkpoint_stem());
  save_checkpoint(result.checkpoint, model, {stage.stage.checkpoint_stem(), lineage, model.config()});
  return result;
}

std::vector<FamilyWeights> specialization_report(
    const OmniModel& model,
    const std::vector<std::pair<BranchId, std::vector<std::string>>>& instructions) {
  std::vector<FamilyWeights> out;
  for (const auto& [family, texts] : instructions) {
    FamilyWeights fw;
    fw.family = family;
    fw.mean.w = {0.0, 0.0, 0.0};
    for (const auto& text : texts) {
      const auto w = model.fusion_weights(text);
      for (std::size_t i = 0; i < 3; ++i) fw.mean.w[i] += w.w[i];
    }
    if (!texts.empty()) {
      for (double& v : fw.mean.w) v /= static_cast<double>(texts.size());
    }
    fw.argmax_matches = fw.mean.argmax() == static_cast<std::size_t>(family);
    out.push_back(fw);
  }
  return out;
}

std::vector<FamilyWeights> specialization_report(const OmniModel& model) {
  std::vector<std::pair<BranchId, std::vector<std::string>>> all;
  for (BranchId b : visual::kAllBranches) all.emplace_back(b, instruction_templates(b));
  return specialization_report(model, all);
}

}  // namespace omnifuse::training
