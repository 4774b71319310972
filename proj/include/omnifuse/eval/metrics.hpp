// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace omnifuse::eval {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// K x K counts; rows are true classes, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  ConfusionMatrix(std::initializer_list<std::initializer_list<std::uint64_t>> rows);

  std::size_t classes() const { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
  void add(std::size_t truth, std::size_t pred, std::uint64_t n = 1);

  std::uint64_t row_total(std::size_t truth) const;
  std::uint64_t total() const;
  std::uint64_t trace() const;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

/// Mean per-class recall over classes that have at least one true sample.
double uar(const ConfusionMatrix& cm);
/// Overall accuracy, trace / total.
double war(const ConfusionMatrix& cm);

/// Lowercase, drop punctuation, split on whitespace.
std::vector<std::string> normalize_words(std::string_view text);

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t errors() const { return substitutions + deletions + insertions; }
};

/// Minimum edit alignment (unit costs). Among optimal alignments the
/// backtrace prefers substitution, then deletion, then insertion.
EditCounts align_words(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

/// Word error rate on already-tokenized words. Throws on an empty reference.
double wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
/// Word error rate on raw strings after normalize_words.
double wer(std::string_view ref, std::string_view hyp);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
/// LCS F-measure, (1 + b^2) R P / (R + b^2 P). Throws on empty input.
double rouge_l(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
               double beta = 1.2);
double rouge_l(std::string_view ref, std::string_view hyp, double beta = 1.2);

// Prediction files hold one JSON object per line, either
// {"id", "ref", "hyp"} for transcripts and captions or
// {"id", "true_label", "pred_label"} for classification. Labels may be
// strings or integers.
struct TextPrediction {
  std::string id;
  std::string ref;
  std::string hyp;
};

struct LabelPrediction {
  std::string id;
  std::string truth;
  std::string pred;
};

struct PredictionSet {
  std::vector<TextPrediction> text;
  std::vector<LabelPrediction> labels;
};

/// Parses JSONL. Blank lines are skipped; a malformed line throws with its
/// line number.
PredictionSet read_predictions(std::istream& in);

struct MetricRow {
  std::string name;
  double value = 0.0;
};

struct EvalReport {
  std::size_t text_samples = 0;
  std::size_t label_samples = 0;
  std::vector<std::string> class_names;  // label rows only, index order
  std::vector<MetricRow> metrics;

  double metric(std::string_view name) const;
  void write_csv(std::ostream& out) const;
  void write_table(std::ostream& out) const;
};

/// Text rows give corpus WER (total errors over total reference words),
/// mean per-sample WER, and mean ROUGE-L. Label rows give UAR and WAR.
EvalReport evaluate(const PredictionSet& predictions, double beta = 1.2);

}  // namespace omnifuse::eval
