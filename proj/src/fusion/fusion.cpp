// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/fusion/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "omnifuse/numerics/ops.hpp"

namespace omnifuse::fusion {

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '<' || c == '>' ||
                      c == '_';
    if (!keep) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

namespace {

std::vector<std::string> standard_words() {
  std::vector<std::string> words = {
      "a",          "about",      "action",   "and",        "angry",     "approaching",
      "are",        "audio",      "between",  "body",       "can",       "clip",
      "describe",   "do",         "does",     "doing",      "emotion",   "expression",
      "facial",     "falling",    "feel",     "following",  "happy",     "hear",
      "how",        "in",         "interact", "interaction", "is",       "kind",
      "make",       "motion",     "movement", "moving",     "of",        "people",
      "person",     "running",    "s",        "sad",        "separating", "show",
      "shown",      "social",     "sound",    "the",        "to",        "together",
      "tone",       "two",        "video",    "voice",      "walking",   "what",
      "with",       "you",
  };
  std::sort(words.begin(), words.end());
  words.insert(words.begin(), {"<pad>", "<unk>", "<eos>", "<video>", "<audio>", "<video_audio>"});
  return words;
}

}  // namespace

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab(standard_words());
  return vocab;
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.size() <= kVideoAudio || words_[kPad] != "<pad>" || words_[kUnk] != "<unk>" ||
      words_[kEos] != "<eos>" || words_[kVideo] != "<video>" || words_[kAudio] != "<audio>" ||
      words_[kVideoAudio] != "<video_audio>") {
    throw FusionError("vocabulary must start with the reserved tokens");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) {
      throw FusionError("duplicate vocabulary word '" + words_[i] + "'");
    }
  }
}

std::size_t Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) != 0;
}

const std::string& Vocabulary::word(std::size_t id) const {
  if (id >= words_.size()) throw FusionError("token id out of range");
  return words_[id];
}

std::vector<std::size_t> Vocabulary::tokenize(std::string_view text) const {
  std::vector<std::size_t> ids;
  std::istringstream in(normalize_text(text));
  std::string w;
  while (in >> w) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::detokenize(const std::vector<std::size_t>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += word(ids[i]);
  }
  return out;
}

InstructionEncoder::InstructionEncoder(const Vocabulary& vocab, std::size_t d_text,
                                       std::size_t max_len, std::uint64_t seed)
    : vocab_(&vocab), d_text_(d_text), max_len_(max_len) {
  Rng rng(derive_seed(seed, "instr_encoder"));
  token_embed_ = normal_tensor({vocab.size(), d_text}, 1.0, rng, false);
  cls_embed_ = normal_tensor({1, d_text}, 0.1, rng, false);
  positions_ = normal_tensor({max_len + 1, d_text}, 0.1, rng, false);
  for (int i = 0; i < 2; ++i) blocks_.emplace_back(d_text, 2 * d_text, rng);
  final_norm_ = LayerNormParams(d_text);
  std::vector<NamedTensor> params;
  collect(params);
  for (auto& p : params) p.tensor.set_requires_grad(false);
}

InstructionEmbedding InstructionEncoder::encode(std::string_view text) const {
  if (vocab_ == nullptr) throw FusionError("instruction encoder not initialised");
  std::vector<std::size_t> ids = vocab_->tokenize(text);
  if (ids.empty()) throw FusionError("empty instruction");
  return encode_ids(ids);
}

InstructionEmbedding InstructionEncoder::encode_ids(const std::vector<std::size_t>& raw_ids) const {
  if (raw_ids.empty()) throw FusionError("empty instruction");
  std::vector<std::size_t> ids(raw_ids.begin(),
                               raw_ids.begin() + static_cast<std::ptrdiff_t>(
                                                     std::min(raw_ids.size(), max_len_)));
  const std::size_t len = ids.size() + 1;
  std::vector<std::size_t> pos(len);
  for (std::size_t i = 0; i < len; ++i) pos[i] = i;
  const std::array<Tensor, 2> parts{cls_embed_, embed_lookup(token_embed_, ids)};
  Tensor x = add(concat_axis(parts, 0), embed_lookup(positions_, pos));
  for (const auto& block : blocks_) x = block(x, /*causal=*/false);
  Tensor cls = slice_rows(final_norm_(x), 0, 1);
  return {std::vector<double>(cls.data().begin(), cls.data().end())};
}

void InstructionEncoder::collect(std::vector<NamedTensor>& out) const {
  out.push_back({"instr_encoder.token_embed", token_embed_});
  out.push_back({"instr_encoder.cls", cls_embed_});
  out.push_back({"instr_encoder.positions", positions_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect("instr_encoder.block" + std::to_string(i), out);
  }
  final_norm_.collect("instr_encoder.final_norm", out);
}

std::string_view normalization_name(WeightNormalization n) {
  return n == WeightNormalization::kSoftmax ? "softmax" : "raw";
}

WeightNormalization parse_normalization(std::string_view name) {
  if (name == "softmax") return WeightNormalization::kSoftmax;
  if (name == "raw") return WeightNormalization::kRaw;
  throw FusionError("unknown weight normalization '" + std::string(name) + "'");
}

std::size_t FusionWeights::argmax() const {
  return static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
}

FusionWeights FusionWeights::from_logits(const std::array<double, 3>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  FusionWeights fw;
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    fw.w[i] = std::exp(logits[i] - mx);
    total += fw.w[i];
  }
  for (double& v : fw.w) v /= total;
  return fw;
}

bool FusionWeights::is_convex() const {
  for (double v : w) {
    if (!(v > 0.0 && v < 1.0)) return false;
  }
  return std::abs(sum() - 1.0) <= 1e-12;
}

WeightGenerator::WeightGenerator(std::size_t d_text, std::size_t d_hidden, std::uint64_t seed,
                                 WeightNormalization normalization)
    : normalization_(normalization) {
  Rng rng(derive_seed(seed, "weight_mlps"));
  intermediate_in_ = Linear(d_text, d_hidden, rng);
  intermediate_out_ = Linear(d_hidden, d_hidden, rng);
  refine_ = Linear(d_hidden, d_hidden, rng);
  // Small head keeps the untrained gate close to uniform.
  head_ = Linear(d_hidden, 3, rng, 0.1);
}

Tensor WeightGenerator::logits(const InstructionEmbedding& cls) const {
  Tensor x = Tensor::from({1, cls.cls.size()}, cls.cls);
  Tensor hidden = gelu(intermediate_out_(gelu(intermediate_in_(x))));
  return reshape(head_(gelu(refine_(hidden))), {3});
}

Tensor WeightGenerator::weights(const InstructionEmbedding& cls) const {
  Tensor z = logits(cls);
  return normalization_ == WeightNormalization::kSoftmax ? softmax_lastdim(z) : z;
}

FusionWeights WeightGenerator::generate(const InstructionEmbedding& cls) const {
  Tensor w = weights(cls);
  FusionWeights fw;
  for (std::size_t i = 0; i < 3; ++i) fw.w[i] = w[i];
  return fw;
}

void WeightGenerator::collect(std::vector<NamedTensor>& out) const {
  intermediate_in_.collect("weight_mlps.mlp1.fc1", out);
  intermediate_out_.collect("weight_mlps.mlp1.fc2", out);
  refine_.collect("weight_mlps.mlp2.fc1", out);
  head_.collect("weight_mlps.mlp2.fc2", out);
}

Tensor fuse(const Tensor& f1, const Tensor& f2, const Tensor& f3, const Tensor& weights) {
  if (f1.shape() != f2.shape() || f1.shape() != f3.shape()) {
    throw FusionError("fuse: branch grids are not aligned: " + shape_str(f1.shape()) + ", " +
                      shape_str(f2.shape()) + ", " + shape_str(f3.shape()));
  }
  if (weights.numel() != 3) throw FusionError("fuse: expected three weights");
  Tensor out = mul(f1, select(weights, 0));
  out = add(out, mul(f2, select(weights, 1)));
  return add(out, mul(f3, select(weights, 2)));
}

Tensor fuse(const Tensor& f1, const Tensor& f2, const Tensor& f3, const FusionWeights& weights) {
  return fuse(f1, f2, f3, Tensor::from({3}, {weights.w[0], weights.w[1], weights.w[2]}));
}

}  // namespace omnifuse::fusion
