// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "omnifuse/audio/audio.hpp"
#include "omnifuse/training/model.hpp"
#include "omnifuse/visual/visual.hpp"

namespace omnifuse::training {

enum class StageKind { kBranchPretrain, kVisualFinetune, kAudioAlign, kCrossmodal };

struct StageId {
  StageKind kind = StageKind::kVisualFinetune;
  visual::BranchId branch = visual::BranchId::kFace;  // branch_pretrain only

  /// "branch_pretrain(face)", "visual_finetune", ...
  std::string name() const;
  /// File stem of the checkpoint this stage writes: "branch_face", ...
  std::string checkpoint_stem() const;
  bool operator==(const StageId&) const = default;
};

StageId parse_stage(std::string_view name);
/// All six stage configurations in schedule order.
std::vector<StageId> all_stages();
/// The trainable groups the schedule assigns to a stage.
std::set<std::string> scheduled_trainable(const StageId& stage);
/// Checkpoint stems a stage must find before it may start.
std::vector<std::string> required_parents(const StageId& stage);

struct DataSpec {
  std::size_t classes = 3;         // per family, at most 3
  std::size_t per_family = 30;
  std::vector<visual::BranchId> families{visual::BranchId::kFace, visual::BranchId::kBody,
                                         visual::BranchId::kInteraction};
  double av_fraction = 0.0;        // share of samples that carry audio
  double blank_prob = 0.5;         // AV samples: chance the matching visual cue is removed
  std::size_t frames = 4;
  std::size_t size = 64;
  double noise = 0.05;
  double audio_seconds = 1.0;

  void validate() const;
};

struct StageConfig {
  StageId stage;
  std::set<std::string> trainable_groups;
  DataSpec data;
  std::size_t steps = 100;
  std::size_t batch = 4;
  double lr = 3e-3;
  std::uint64_t seed = 7;
  std::size_t heldout_per_family = 20;

  /// Defaults for each stage with the scheduled trainable set filled in.
  static StageConfig defaults(const StageId& stage);
};

struct SyntheticSample {
  std::string id;
  visual::VideoClip clip;
  std::optional<audio::AudioWave> wave;
  std::string instruction;
  std::string answer;
  visual::BranchId family = visual::BranchId::kFace;
  std::size_t label = 0;
  std::array<std::size_t, 3> aspect_labels{};  // per aspect, independent draws
  bool has_audio = false;
  bool cue_blanked = false;  // matching visual cue removed
  std::optional<std::size_t> twin_of;  // index of the AV original
};

/// Answer word for (family, class).
std::string_view label_word(visual::BranchId family, std::size_t label);
/// Instruction templates of a family.
const std::vector<std::string>& instruction_templates(visual::BranchId family);
/// Tone frequency (Hz) that encodes a class in the audio track.
double tone_hz(std::size_t label);

/// Primary samples followed by one audio-stripped twin per AV sample.
std::vector<SyntheticSample> make_synthetic_dataset(const DataSpec& spec, std::uint64_t seed);

/// Brute-force per-aspect classifier reading only channel `aspect` of a clip.
std::size_t oracle_classify(const visual::VideoClip& clip, visual::BranchId aspect,
                            std::size_t classes);

struct OracleReport {
  double matching = 0.0;      // accuracy from the aspect that matches the family
  double non_matching = 0.0;  // accuracy from the other aspects
  std::size_t scored = 0;     // samples with a visible cue
};
OracleReport oracle_report(const std::vector<SyntheticSample>& samples, std::size_t classes);

/// Sets frozen flags and requires_grad from the stage. Rejects unknown group
/// names and any trainable set that departs from the schedule.
void apply_freeze(OmniModel& model, const StageConfig& stage);

struct TrainRow {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::uint64_t frozen_hash = 0;
};

struct TrainLog {
  std::vector<TrainRow> rows;

  void write_csv(std::ostream& out) const;
  /// Trailing moving average with the given window.
  std::vector<double> smoothed(std::size_t window) const;
};

/// How a stage feeds a sample to the model.
struct SampleView {
  sequence::Directive directive = sequence::Directive::kVideo;
  FusionMode mode;
};
SampleView stage_view(const StageId& stage, const SyntheticSample& sample);

std::vector<PreparedSample> prepare_all(const OmniModel& model,
                                        const std::vector<SyntheticSample>& samples);

/// The optimisation loop alone: applies the freeze, runs `steps` Adam steps
/// over mini-batches, and asserts before each step that no frozen tensor
/// holds a gradient.
TrainLog train_steps(OmniModel& model, const StageConfig& stage,
                     const std::vector<SyntheticSample>& samples,
                     const std::vector<PreparedSample>& prepared, std::size_t steps);

double accuracy(const OmniModel& model, const std::vector<SyntheticSample>& samples,
                const std::vector<PreparedSample>& prepared, sequence::Directive directive,
                FusionMode mode);
/// Accuracy with each sample's stage view.
double stage_accuracy(const OmniModel& model, const StageId& stage,
                      const std::vector<SyntheticSample>& samples,
                      const std::vector<PreparedSample>& prepared);

struct ModalityReport {
  double video_audio = 0.0;
  double video_only = 0.0;
  double chance = 0.0;
};

struct StageResult {
  TrainLog log;
  double heldout_accuracy = 0.0;
  std::uint64_t frozen_hash_before = 0;
  std::uint64_t frozen_hash_after = 0;
  std::filesystem::path checkpoint;
  std::optional<ModalityReport> modality;
};

struct StageData {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> heldout;
};
StageData make_stage_data(const StageConfig& stage);

/// Lineage check and parent loading, training, held-out evaluation, and a
/// checkpoint written to `<dir>/<stem>.ckpt`.
StageResult run_stage(OmniModel& model, const StageConfig& stage, const StageData& data,
                      const std::filesystem::path& checkpoint_dir);

struct FamilyWeights {
  visual::BranchId family = visual::BranchId::kFace;
  fusion::FusionWeights mean;
  bool argmax_matches = false;
};

/// Mean fusion weights per family over its instructions.
std::vector<FamilyWeights> specialization_report(
    const OmniModel& model,
    const std::vector<std::pair<visual::BranchId, std::vector<std::string>>>& instructions);
std::vector<FamilyWeights> specialization_report(const OmniModel& model);

}  // namespace omnifuse::training
