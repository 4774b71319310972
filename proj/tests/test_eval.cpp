// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "omnifuse/eval/metrics.hpp"
#include "support/oracles.hpp"

using namespace omnifuse::eval;

namespace {

std::vector<std::string> random_words(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  static const char* kWords[] = {"a", "b", "c", "d", "e", "f"};
  std::uniform_int_distribution<std::size_t> len(lo, hi), w(0, 5);
  std::vector<std::string> out(len(rng));
  for (auto& s : out) s = kWords[w(rng)];
  return out;
}

}  // namespace

TEST_CASE("uar and war on hand-computed matrices") {
  CHECK(std::abs(uar({{2, 0}, {1, 1}}) - 0.75) <= 1e-9);
  CHECK(std::abs(war({{2, 0}, {1, 1}}) - 0.75) <= 1e-9);
  CHECK(std::abs(uar({{3, 0, 0}, {0, 1, 1}, {0, 0, 0}}) - 0.75) <= 1e-9);
  CHECK(std::abs(war({{3, 0}, {1, 1}}) - 0.8) <= 1e-9);
  CHECK(std::abs(uar({{3, 0}, {1, 1}}) - 0.75) <= 1e-9);
  CHECK(war({{0, 1}, {1, 0}}) == 0.0);
  CHECK(uar({{4, 0, 0}, {0, 2, 0}, {0, 0, 9}}) == 1.0);
}

TEST_CASE("empty confusion matrices are rejected") {
  CHECK_THROWS_AS(uar(ConfusionMatrix(3)), MetricError);
  CHECK_THROWS_AS(war(ConfusionMatrix(2)), MetricError);
  CHECK_THROWS_AS(ConfusionMatrix(0), MetricError);
  CHECK_THROWS_AS(ConfusionMatrix({{1, 0}, {0}}), MetricError);
  ConfusionMatrix cm(2);
  CHECK_THROWS_AS(cm.add(2, 0), MetricError);
}

TEST_CASE("uar and war are invariant to relabelling classes") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> count(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 5;
    ConfusionMatrix cm(k);
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t p = 0; p < k; ++p) cm.add(t, p, count(rng));
    }
    if (cm.total() == 0) continue;
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    ConfusionMatrix moved(k);
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t p = 0; p < k; ++p) moved.add(perm[t], perm[p], cm.at(t, p));
    }
    CHECK(uar(moved) == doctest::Approx(uar(cm)).epsilon(1e-12));
    CHECK(war(moved) == war(cm));
  }
}

TEST_CASE("wer on hand examples") {
  CHECK(wer("the cat sat", "the cat sat") == 0.0);
  CHECK(std::abs(wer("a b c d e", "a x c e") - 0.4) <= 1e-9);
  CHECK(std::abs(wer("a", "x y z") - 3.0) <= 1e-9);
  const EditCounts c = align_words({"a", "b", "c", "d", "e"}, {"a", "x", "c", "e"});
  CHECK(c.substitutions == 1);
  CHECK(c.deletions == 1);
  CHECK(c.insertions == 0);
}

TEST_CASE("wer normalises case, punctuation and spacing") {
  CHECK(wer("Hello, World!", "hello   world") == 0.0);
  CHECK(normalize_words("  It's   A TEST. ") == std::vector<std::string>{"its", "a", "test"});
  CHECK_THROWS_AS(wer("...", "a"), MetricError);
  CHECK_THROWS_AS(wer(std::vector<std::string>{}, std::vector<std::string>{"a"}), MetricError);
}

TEST_CASE("wer equals a brute-force edit distance on 1000 random pairs") {
  std::mt19937_64 rng(1000);
  for (int i = 0; i < 1000; ++i) {
    const auto ref = random_words(rng, 1, 12);
    const auto hyp = random_words(rng, 0, 12);
    const std::size_t d = omnifuse::oracle::edit_distance(ref, hyp);
    CHECK(align_words(ref, hyp).errors() == d);
    CHECK(wer(ref, hyp) == static_cast<double>(d) / static_cast<double>(ref.size()));
  }
}

TEST_CASE("rouge-l on hand examples") {
  const double expected = 2.44 * 0.75 / (0.75 + 1.44);
  CHECK(std::abs(rouge_l("a b c d", "a b d") - expected) <= 1e-9);
  CHECK(std::abs(rouge_l("a b c d", "a b d") - 0.8356) <= 1e-4);
  CHECK(rouge_l("a b c", "a b c") == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rouge_l("a b c", "x y z") == 0.0);
  CHECK(std::abs(rouge_l("a b c d", "a b d", 100.0) - 0.75) <= 1e-3);
  CHECK(std::abs(rouge_l("a b c d", "a b d", 0.01) - 1.0) <= 1e-3);
  CHECK_THROWS_AS(rouge_l("", "a"), MetricError);
  CHECK_THROWS_AS(rouge_l("a", ""), MetricError);
}

TEST_CASE("lcs length matches the recursive oracle") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_words(rng, 0, 10);
    const auto b = random_words(rng, 0, 10);
    CHECK(lcs_length(a, b) == omnifuse::oracle::lcs(a, b));
  }
}

TEST_CASE("rouge-l limits in beta over random pairs") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto ref = random_words(rng, 1, 10);
    const auto hyp = random_words(rng, 1, 10);
    const double l = static_cast<double>(omnifuse::oracle::lcs(ref, hyp));
    if (l == 0.0) {
      CHECK(rouge_l(ref, hyp) == 0.0);
      continue;
    }
    const double r = l / static_cast<double>(ref.size()), p = l / static_cast<double>(hyp.size());
    CHECK(std::abs(rouge_l(ref, hyp, 100.0) - r) <= 1e-3);
    CHECK(std::abs(rouge_l(ref, hyp, 0.01) - p) <= 1e-3);
    const double f = rouge_l(ref, hyp);
    CHECK(f >= std::min(r, p) - 1e-12);
    CHECK(f <= std::max(r, p) + 1e-12);
  }
}

TEST_CASE("prediction files and the report") {
  std::istringstream in(
      "{\"id\":\"t1\",\"ref\":\"a b c d e\",\"hyp\":\"a x c e\"}\n"
      "\n"
      "{\"id\":\"t2\",\"ref\":\"a\",\"hyp\":\"a\"}\n"
      "{\"id\":\"l1\",\"true_label\":\"happy\",\"pred_label\":\"happy\"}\n"
      "{\"id\":\"l2\",\"true_label\":\"happy\",\"pred_label\":\"happy\"}\n"
      "{\"id\":\"l3\",\"true_label\":\"sad\",\"pred_label\":\"happy\"}\n"
      "{\"id\":\"l4\",\"true_label\":\"sad\",\"pred_label\":\"sad\"}\n");
  const PredictionSet set = read_predictions(in);
  REQUIRE(set.text.size() == 2);
  REQUIRE(set.labels.size() == 4);
  const EvalReport report = evaluate(set);
  CHECK(report.text_samples == 2);
  CHECK(report.label_samples == 4);
  // Corpus WER pools errors: 2 errors over 6 reference words.
  CHECK(std::abs(report.metric("wer") - 2.0 / 6.0) <= 1e-12);
  CHECK(std::abs(report.metric("wer_mean") - 0.2) <= 1e-12);
  CHECK(std::abs(report.metric("uar") - 0.75) <= 1e-12);
  CHECK(std::abs(report.metric("war") - 0.75) <= 1e-12);
  CHECK_THROWS_AS(report.metric("cider"), MetricError);

  std::ostringstream csv;
  report.write_csv(csv);
  CHECK(csv.str().rfind("metric,value\nwer,0.3333333333\n", 0) == 0);
  std::ostringstream table;
  report.write_table(table);
  CHECK(table.str().find("uar") != std::string::npos);
}

TEST_CASE("malformed prediction lines name the line") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_predictions(in);
  };
  CHECK_THROWS_WITH_AS(parse("{\"ref\":\"a\",\"hyp\":\"b\"}\nnot json\n"), doctest::Contains("line 2"), MetricError);
  CHECK_THROWS_AS(parse("[1,2]\n"), MetricError);
  CHECK_THROWS_AS(parse("{\"id\":\"x\"}\n"), MetricError);
  CHECK_THROWS_AS(parse("{\"ref\":\"a\"}\n"), MetricError);
  CHECK_THROWS_AS(parse("{\"ref\":3.5,\"hyp\":\"a\"}\n"), MetricError);
  CHECK_THROWS_AS(parse("{\"true_label\":[1],\"pred_label\":1}\n"), MetricError);
  const PredictionSet ints = parse("{\"true_label\":10,\"pred_label\":2}\n{\"true_label\":2,\"pred_label\":2}\n");
  CHECK(ints.labels[0].truth == "10");
  const EvalReport r = evaluate(ints);
  CHECK(r.class_names == std::vector<std::string>{"2", "10"});
  CHECK_THROWS_AS(evaluate(PredictionSet{}), MetricError);
}
