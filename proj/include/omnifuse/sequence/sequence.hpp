// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "omnifuse/audio/audio.hpp"
#include "omnifuse/fusion/fusion.hpp"
#include "omnifuse/numerics/layers.hpp"
#include "omnifuse/numerics/tensor.hpp"

namespace omnifuse::sequence {

class SequenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Modality selector carried as the first token of every sequence.
enum class Directive { kVideo, kAudio, kVideoAudio };

std::string_view directive_token(Directive d);
Directive parse_directive(std::string_view token);
std::size_t directive_id(Directive d);
bool directive_wants_video(Directive d);
bool directive_wants_audio(Directive d);

enum class Marker : std::size_t { kVidBeg = 0, kVidEnd, kAudBeg, kAudEnd, kNullFill };
inline constexpr std::size_t kMarkerCount = 5;
std::string_view marker_name(Marker m);

enum class SourceTag : std::uint8_t { kText, kVision, kAudio, kMarker, kFill };

/// Learned marker and default-fill embeddings. Their serialized IDs follow
/// the text vocabulary so the two ranges never overlap.
class SpecialTokens {
 public:
  SpecialTokens() = default;
  SpecialTokens(std::size_t d_model, std::uint64_t seed);

  Tensor embed(const std::vector<Marker>& markers) const;
  static std::size_t serialized_id(Marker m, std::size_t vocab_size) {
    return vocab_size + static_cast<std::size_t>(m);
  }
  void collect(std::vector<NamedTensor>& out) const;

 private:
  Tensor table_;  // [kMarkerCount, d_model]
};

struct TokenSequence {
  Tensor embeddings;  // [L, d_model]
  std::vector<SourceTag> tags;
  std::vector<int> markers;           // Marker index per position, -1 elsewhere
  std::vector<std::size_t> text_ids;  // text positions only, in order

  std::size_t length() const { return tags.size(); }
  std::vector<std::size_t> positions() const;
};

struct DecoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 32;
  std::size_t layers = 2;
  std::size_t hidden = 128;
  std::size_t max_len = 256;
};

/// Tiny causal transformer language model over the unified embedding stream.
class Decoder {
 public:
  Decoder() = default;
  Decoder(const DecoderConfig& config, std::uint64_t seed);

  Tensor embed_text(const std::vector<std::size_t>& ids) const;
  /// Final hidden states [L, d_model].
  Tensor hidden(const TokenSequence& seq) const;
  /// Logits for every position, [L, V].
  Tensor logits(const TokenSequence& seq) const;
  /// Logits for the last `count` positions only.
  Tensor logits_tail(const TokenSequence& seq, std::size_t count) const;

  const DecoderConfig& config() const { return config_; }
  void collect(std::vector<NamedTensor>& out) const;

 private:
  DecoderConfig config_;
  Tensor token_embed_;  // [V, d]
  Tensor positions_;    // [max_len, d]
  std::vector<TransformerBlock> blocks_;
  LayerNormParams final_norm_;
  Linear head_;
};

struct AssembleOptions {
  std::size_t placeholder_len = 4;
};

/// Lays out [directive][VID_BEG][vision|fill][VID_END][AUD_BEG][audio|fill]
/// [AUD_END][text]. The directive decides which modalities are used: one
/// that is absent or excluded is replaced by exactly placeholder_len fill
/// embeddings.
TokenSequence assemble(const Decoder& decoder, const SpecialTokens& specials,
                       const std::vector<std::size_t>& text_ids, const Tensor* vision,
                       const Tensor* audio, Directive directive,
                       const AssembleOptions& options = {});

/// Length predicted by the layout for the given modality sizes (0 = absent).
std::size_t expected_length(std::size_t text_len, std::size_t vision_tokens,
                            std::size_t audio_tokens, Directive directive,
                            std::size_t placeholder_len);

/// True when VID and AUD spans appear as matched, non-overlapping pairs with
/// only their own content inside.
bool markers_well_nested(const TokenSequence& seq);

/// Appends text tokens to an existing sequence.
TokenSequence extend(const Decoder& decoder, const TokenSequence& seq,
                     const std::vector<std::size_t>& ids);

/// Greedy decoding; stops after <eos> or max_new tokens (the <eos> is kept).
std::vector<std::size_t> generate(const Decoder& decoder, const TokenSequence& seq,
                                  std::size_t max_new);

}  // namespace omnifuse::sequence
