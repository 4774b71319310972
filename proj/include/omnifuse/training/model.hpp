// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "omnifuse/audio/audio.hpp"
#include "omnifuse/fusion/fusion.hpp"
#include "omnifuse/numerics/optim.hpp"
#include "omnifuse/sequence/sequence.hpp"
#include "omnifuse/visual/visual.hpp"

namespace omnifuse::training {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  std::size_t input_size = 64;
  std::size_t patch = 8;
  std::size_t target_grid = 4;
  std::size_t d_enc = 32;
  std::size_t d_model = 32;
  std::size_t d_text = 32;     // instruction encoder width
  std::size_t d_hidden = 32;   // weight generator width
  std::size_t d_audio = 32;    // audio encoder width
  std::size_t placeholder_len = 4;
  std::size_t decoder_layers = 2;
  std::size_t decoder_hidden = 128;
  std::size_t max_len = 256;
  std::size_t instruction_max_len = 16;
  fusion::WeightNormalization normalization = fusion::WeightNormalization::kSoftmax;
  std::uint64_t seed = 1234;

  visual::VisualConfig visual() const;
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr std::array<std::string_view, 10> kGroupNames{
    "vis_encoder", "instr_encoder", "audio_encoder", "proj_face",  "proj_body",
    "proj_inter",  "proj_audio",    "weight_mlps",   "decoder",    "special_tokens"};

bool is_group_name(std::string_view name);
std::string_view projector_group(visual::BranchId branch);

/// How the three branch grids are combined before the decoder.
struct FusionMode {
  bool gated = true;
  visual::BranchId branch = visual::BranchId::kFace;  // used when !gated

  static FusionMode gate() { return {}; }
  static FusionMode only(visual::BranchId b) { return {false, b}; }
};

/// Per-sample inputs with every frozen-encoder output precomputed.
struct PreparedSample {
  std::string id;
  Tensor raw_grid;                     // [T, g, g, d_enc]
  fusion::InstructionEmbedding cls;
  std::optional<Tensor> audio_frames;  // [T_enc, d_audio]
  std::vector<std::size_t> prompt_ids;
  std::vector<std::size_t> answer_ids;  // label then <eos>
  visual::BranchId family = visual::BranchId::kFace;
};

/// The full model: frozen encoders, projectors, gate, decoder, and markers,
/// registered as ten named parameter groups.
class OmniModel {
 public:
  explicit OmniModel(const ModelConfig& config);
  OmniModel(const OmniModel&) = delete;
  OmniModel& operator=(const OmniModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const fusion::Vocabulary& vocab() const { return fusion::Vocabulary::standard(); }

  std::vector<ParamGroup>& groups() { return groups_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }
  ParamGroup& group(std::string_view name);
  const ParamGroup& group(std::string_view name) const;

  const visual::VisualBranches& visual() const { return visual_; }
  const fusion::InstructionEncoder& instruction_encoder() const { return instr_; }
  const fusion::WeightGenerator& weight_generator() const { return gate_; }
  fusion::WeightGenerator& weight_generator() { return gate_; }
  const audio::AudioEncoderStub& audio_encoder() const { return audio_encoder_; }
  const sequence::Decoder& decoder() const { return decoder_; }
  const sequence::SpecialTokens& special_tokens() const { return specials_; }

  PreparedSample prepare(const std::string& id, const visual::VideoClip& clip,
                         const audio::AudioWave* wave, std::string_view instruction,
                         std::string_view answer, visual::BranchId family) const;

  Tensor visual_tokens(const PreparedSample& s, FusionMode mode) const;
  Tensor audio_tokens(const PreparedSample& s) const;

  /// Sequence for prompt + `extra` text; modalities excluded by the
  /// directive are never computed.
  sequence::TokenSequence build_sequence(const PreparedSample& s, sequence::Directive directive,
                                         FusionMode mode,
                                         const std::vector<std::size_t>& extra = {}) const;
  /// Mean next-token cross-entropy on the answer tokens.
  Tensor loss(const PreparedSample& s, sequence::Directive directive, FusionMode mode) const;
  /// Greedy first answer token.
  std::size_t predict(const PreparedSample& s, sequence::Directive directive,
                      FusionMode mode) const;
  std::vector<std::size_t> generate(const PreparedSample& s, sequence::Directive directive,
                                    std::size_t max_new) const;

  fusion::FusionWeights fusion_weights(std::string_view instruction) const;

 private:
  ModelConfig config_;
  visual::VisualBranches visual_;
  fusion::InstructionEncoder instr_;
  audio::AudioEncoderStub audio_encoder_;
  audio::AudioProjector audio_projector_;
  fusion::WeightGenerator gate_;
  sequence::Decoder decoder_;
  sequence::SpecialTokens specials_;
  std::vector<ParamGroup> groups_;
};

// Checkpoints: an "OMNICKPT" magic, a JSON header (format version, stage,
// lineage, model config, vocabulary, marker ids, tensor index), then the
// tensors as little-endian float64 in index order.
struct CheckpointMeta {
  std::string stage;
  std::vector<std::string> lineage;  // parent checkpoint stages, oldest first
  ModelConfig config;
};

void save_checkpoint(const std::filesystem::path& path, const OmniModel& model,
                     const CheckpointMeta& meta);
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);
/// Loads the named groups (all when empty) into the model. The checkpoint's
/// model config and vocabulary must match.
CheckpointMeta load_checkpoint(const std::filesystem::path& path, OmniModel& model,
                               const std::vector<std::string>& groups = {});

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

}  // namespace omnifuse::training
