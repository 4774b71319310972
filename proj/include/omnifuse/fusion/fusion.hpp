// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "omnifuse/numerics/layers.hpp"
#include "omnifuse/numerics/tensor.hpp"

namespace omnifuse::fusion {

class FusionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercase, map every character outside [a-z0-9<>_] to a space, and
/// collapse whitespace.
std::string normalize_text(std::string_view text);

/// Closed word-level vocabulary shared by the instruction encoder and the
/// decoder. Unknown words map to <unk>.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kVideo = 3;
  static constexpr std::size_t kAudio = 4;
  static constexpr std::size_t kVideoAudio = 5;

  /// The built-in vocabulary.
  static const Vocabulary& standard();
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  std::size_t id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(std::size_t id) const;
  const std::vector<std::string>& words() const { return words_; }

  std::vector<std::size_t> tokenize(std::string_view text) const;
  std::string detokenize(const std::vector<std::size_t>& ids) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct InstructionEmbedding {
  std::vector<double> cls;
};

/// Frozen bidirectional mini-transformer with a prepended classification
/// token; the output at that position summarises the instruction.
class InstructionEncoder {
 public:
  InstructionEncoder() = default;
  InstructionEncoder(const Vocabulary& vocab, std::size_t d_text, std::size_t max_len,
                     std::uint64_t seed);

  InstructionEmbedding encode(std::string_view text) const;
  InstructionEmbedding encode_ids(const std::vector<std::size_t>& ids) const;
  std::size_t width() const { return d_text_; }
  void collect(std::vector<NamedTensor>& out) const;

 private:
  const Vocabulary* vocab_ = nullptr;
  std::size_t d_text_ = 0;
  std::size_t max_len_ = 0;
  Tensor token_embed_;  // [V, d_t]
  Tensor cls_embed_;    // [1, d_t]
  Tensor positions_;    // [max_len + 1, d_t]
  std::vector<TransformerBlock> blocks_;
  LayerNormParams final_norm_;
};

enum class WeightNormalization { kSoftmax, kRaw };

std::string_view normalization_name(WeightNormalization n);
WeightNormalization parse_normalization(std::string_view name);

/// The (w1, w2, w3) scalars for the face, body, and interaction branches.
struct FusionWeights {
  std::array<double, 3> w{1.0 / 3, 1.0 / 3, 1.0 / 3};

  double sum() const { return w[0] + w[1] + w[2]; }
  std::size_t argmax() const;
  /// Softmax normalisation of raw logits.
  static FusionWeights from_logits(const std::array<double, 3>& logits);
  /// Checks the convex-weight invariant: each in (0,1), sum 1 within 1e-12.
  bool is_convex() const;
};

/// Two stacked MLPs: the first maps the summary vector to an intermediate
/// representation, the second refines it to one logit per branch.
class WeightGenerator {
 public:
  WeightGenerator() = default;
  WeightGenerator(std::size_t d_text, std::size_t d_hidden, std::uint64_t seed,
                  WeightNormalization normalization = WeightNormalization::kSoftmax);

  Tensor logits(const InstructionEmbedding& cls) const;  // [3]
  Tensor weights(const InstructionEmbedding& cls) const;  // [3], differentiable
  FusionWeights generate(const InstructionEmbedding& cls) const;
  WeightNormalization normalization() const { return normalization_; }
  void set_normalization(WeightNormalization n) { normalization_ = n; }
  void collect(std::vector<NamedTensor>& out) const;

 private:
  Linear intermediate_in_;
  Linear intermediate_out_;
  Linear refine_;
  Linear head_;
  WeightNormalization normalization_ = WeightNormalization::kSoftmax;
};

/// F = w1 * F1 + w2 * F2 + w3 * F3 with w a [3] tensor; grids must match.
Tensor fuse(const Tensor& f1, const Tensor& f2, const Tensor& f3, const Tensor& weights);
Tensor fuse(const Tensor& f1, const Tensor& f2, const Tensor& f3, const FusionWeights& weights);

}  // namespace omnifuse::fusion
