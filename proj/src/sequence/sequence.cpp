// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/sequence/sequence.hpp"

#include <algorithm>

#include "omnifuse/numerics/ops.hpp"

namespace omnifuse::sequence {

using fusion::Vocabulary;

std::string_view directive_token(Directive d) {
  switch (d) {
    case Directive::kVideo: return "<video>";
    case Directive::kAudio: return "<audio>";
    case Directive::kVideoAudio: return "<video_audio>";
  }
  return "<video>";
}

Directive parse_directive(std::string_view token) {
  if (token == "<video>" || token == "video") return Directive::kVideo;
  if (token == "<audio>" || token == "audio") return Directive::kAudio;
  if (token == "<video_audio>" || token == "video_audio") return Directive::kVideoAudio;
  throw SequenceError("unknown directive '" + std::string(token) + "'");
}

std::size_t directive_id(Directive d) {
  switch (d) {
    case Directive::kVideo: return Vocabulary::kVideo;
    case Directive::kAudio: return Vocabulary::kAudio;
    case Directive::kVideoAudio: return Vocabulary::kVideoAudio;
  }
  return Vocabulary::kVideo;
}

bool directive_wants_video(Directive d) { return d != Directive::kAudio; }
bool directive_wants_audio(Directive d) { return d != Directive::kVideo; }

std::string_view marker_name(Marker m) {
  switch (m) {
    case Marker::kVidBeg: return "VID_BEG";
    case Marker::kVidEnd: return "VID_END";
    case Marker::kAudBeg: return "AUD_BEG";
    case Marker::kAudEnd: return "AUD_END";
    case Marker::kNullFill: return "NULL_FILL";
  }
  return "?";
}

SpecialTokens::SpecialTokens(std::size_t d_model, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "special_tokens"));
  table_ = normal_tensor({kMarkerCount, d_model}, 1.0, rng);
}

Tensor SpecialTokens::embed(const std::vector<Marker>& markers) const {
  std::vector<std::size_t> ids;
  ids.reserve(markers.size());
  for (Marker m : markers) ids.push_back(static_cast<std::size_t>(m));
  return embed_lookup(table_, ids);
}

void SpecialTokens::collect(std::vector<NamedTensor>& out) const {
  out.push_back({"special_tokens.table", table_});
}

std::vector<std::size_t> TokenSequence::positions() const {
  std::vector<std::size_t> pos(length());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  return pos;
}

Decoder::Decoder(const DecoderConfig& config, std::uint64_t seed) : config_(config) {
  if (config.vocab_size == 0) throw SequenceError("decoder needs a vocabulary");
  Rng rng(derive_seed(seed, "decoder"));
  token_embed_ = normal_tensor({config.vocab_size, config.d_model}, 1.0, rng);
  positions_ = normal_tensor({config.max_len, config.d_model}, 0.1, rng);
  for (std::size_t i = 0; i < config.layers; ++i) {
    blocks_.emplace_back(config.d_model, config.hidden, rng);
  }
  final_norm_ = LayerNormParams(config.d_model);
  head_ = Linear(config.d_model, config.vocab_size, rng);
}

Tensor Decoder::embed_text(const std::vector<std::size_t>& ids) const {
  return embed_lookup(token_embed_, ids);
}

Tensor Decoder::hidden(const TokenSequence& seq) const {
  const std::size_t len = seq.length();
  if (len == 0) throw SequenceError("decode: empty sequence");
  if (len > config_.max_len) {
    throw SequenceError("decode: sequence length " + std::to_string(len) + " exceeds max_len " +
                        std::to_string(config_.max_len));
  }
  Tensor x = add(seq.embeddings, embed_lookup(positions_, seq.positions()));
  for (const auto& block : blocks_) x = block(x, /*causal=*/true);
  return final_norm_(x);
}

Tensor Decoder::logits(const TokenSequence& seq) const { return head_(hidden(seq)); }

Tensor Decoder::logits_tail(const TokenSequence& seq, std::size_t count) const {
  Tensor h = hidden(seq);
  const std::size_t len = h.dim(0);
  if (count == 0 || count > len) throw SequenceError("logits_tail: bad row count");
  return head_(slice_rows(h, len - count, len));
}

void Decoder::collect(std::vector<NamedTensor>& out) const {
  out.push_back({"decoder.token_embed", token_embed_});
  out.push_back({"decoder.positions", positions_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect("decoder.block" + std::to_string(i), out);
  }
  final_norm_.collect("decoder.final_norm", out);
  head_.collect("decoder.head", out);
}

namespace {

struct Builder {
  std::vector<Tensor> parts;
  TokenSequence seq;

  void push(const Tensor& rows, SourceTag tag, int marker = -1) {
    parts.push_back(rows);
    for (std::size_t i = 0; i < rows.dim(0); ++i) {
      seq.tags.push_back(tag);
      seq.markers.push_back(marker);
    }
  }
};

}  // namespace

TokenSequence assemble(const Decoder& decoder, const SpecialTokens& specials,
                       const std::vector<std::size_t>& text_ids, const Tensor* vision,
                       const Tensor* audio, Directive directive, const AssembleOptions& options) {
  if (text_ids.empty()) throw SequenceError("assemble: no text tokens");
  if (options.placeholder_len == 0) throw SequenceError("assemble: placeholder_len must be positive");
  const std::size_t d = decoder.config().d_model;
  const bool use_video = vision != nullptr && directive_wants_video(directive);
  const bool use_audio = audio != nullptr && directive_wants_audio(directive);
  if (vision != nullptr && (vision->rank() != 4 || vision->dim(3) != d)) {
    throw SequenceError("assemble: vision grid must be [T, H, W, " + std::to_string(d) + "], got " +
                        shape_str(vision->shape()));
  }
  if (audio != nullptr && (audio->rank() != 2 || audio->dim(1) != d)) {
    throw SequenceError("assemble: audio tokens must be [T_a, " + std::to_string(d) + "], got " +
                        shape_str(audio->shape()));
  }

  Builder b;
  const std::vector<Marker> fill(options.placeholder_len, Marker::kNullFill);
  auto marker = [&](Marker m) {
    b.push(specials.embed({m}), SourceTag::kMarker, static_cast<int>(m));
  };

  b.push(decoder.embed_text({directive_id(directive)}), SourceTag::kText);
  b.seq.text_ids.push_back(directive_id(directive));
  marker(Marker::kVidBeg);
  if (use_video) {
    const std::size_t n = vision->numel() / d;
    b.push(reshape(*vision, {n, d}), SourceTag::kVision);
  } else {
    b.push(specials.embed(fill), SourceTag::kFill, static_cast<int>(Marker::kNullFill));
  }
  marker(Marker::kVidEnd);
  marker(Marker::kAudBeg);
  if (use_audio) {
    b.push(*audio, SourceTag::kAudio);
  } else {
    b.push(specials.embed(fill), SourceTag::kFill, static_cast<int>(Marker::kNullFill));
  }
  marker(Marker::kAudEnd);
  b.push(decoder.embed_text(text_ids), SourceTag::kText);
  b.seq.text_ids.insert(b.seq.text_ids.end(), text_ids.begin(), text_ids.end());

  b.seq.embeddings = concat_axis(b.parts, 0);
  return std::move(b.seq);
}

std::size_t expected_length(std::size_t text_len, std::size_t vision_tokens,
                            std::size_t audio_tokens, Directive directive,
                            std::size_t placeholder_len) {
  const std::size_t v =
      (vision_tokens > 0 && directive_wants_video(directive)) ? vision_tokens : placeholder_len;
  const std::size_t a =
      (audio_tokens > 0 && directive_wants_audio(directive)) ? audio_tokens : placeholder_len;
  return 1 + 2 + v + 2 + a + text_len;
}

bool markers_well_nested(const TokenSequence& seq) {
  if (seq.markers.size() != seq.tags.size()) return false;
  // Expected span order: VID_BEG content VID_END AUD_BEG content AUD_END.
  const std::array<std::pair<Marker, Marker>, 2> spans{
      std::pair{Marker::kVidBeg, Marker::kVidEnd}, std::pair{Marker::kAudBeg, Marker::kAudEnd}};
  const std::array<SourceTag, 2> content{SourceTag::kVision, SourceTag::kAudio};
  std::size_t span = 0;
  bool open = false;
  for (std::size_t i = 0; i < seq.tags.size(); ++i) {
    const SourceTag tag = seq.tags[i];
    if (tag == SourceTag::kMarker) {
      if (span >= spans.size()) return false;
      const auto m = static_cast<Marker>(seq.markers[i]);
      if (!open && m == spans[span].first) {
        open = true;
      } else if (open && m == spans[span].second) {
        open = false;
        ++span;
      } else {
        return false;
      }
    } else if (tag == SourceTag::kVision || tag == SourceTag::kAudio || tag == SourceTag::kFill) {
      if (!open) return false;
      if (tag != SourceTag::kFill && tag != content[span]) return false;
    }
  }
  return !open && span == spans.size();
}

TokenSequence extend(const Decoder& decoder, const TokenSequence& seq,
                     const std::vector<std::size_t>& ids) {
  if (ids.empty()) return seq;
  TokenSequence out = seq;
  const std::array<Tensor, 2> parts{seq.embeddings, decoder.embed_text(ids)};
  out.embeddings = concat_axis(parts, 0);
  for (std::size_t id : ids) {
    out.tags.push_back(SourceTag::kText);
    out.markers.push_back(-1);
    out.text_ids.push_back(id);
  }
  return out;
}

std::vector<std::size_t> generate(const Decoder& decoder, const TokenSequence& seq,
                                  std::size_t max_new) {
  if (max_new == 0) throw SequenceError("generate: max_new must be at least 1");
  std::vector<std::size_t> out;
  TokenSequence cur = seq;
  for (std::size_t step = 0; step < max_new; ++step) {
    Tensor row = decoder.logits_tail(cur, 1);
    auto values = row.data();
    const auto next = static_cast<std::size_t>(
        std::max_element(values.begin(), values.end()) - values.begin());
    out.push_back(next);
    if (next == Vocabulary::kEos || step + 1 == max_new) break;
    cur = extend(decoder, cur, {next});
  }
  return out;
}

}  // namespace omnifuse::sequence
