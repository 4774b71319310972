// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/eval/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <iomanip>
#include <map>

namespace omnifuse::eval {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes) {
  if (classes == 0) throw MetricError("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(
    std::initializer_list<std::initializer_list<std::uint64_t>> rows)
    : ConfusionMatrix(rows.size()) {
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != k_) throw MetricError("confusion matrix must be square");
    std::size_t c = 0;
    for (auto v : row) counts_[r * k_ + c++] = v;
    ++r;
  }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t pred, std::uint64_t n) {
  if (truth >= k_ || pred >= k_) throw MetricError("class index out of range");
  counts_[truth * k_ + pred] += n;
}

std::uint64_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t c = 0; c < k_; ++c) s += at(truth, c);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += at(i, i);
  return s;
}

double uar(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    const auto n = cm.row_total(i);
    if (n == 0) continue;
    sum += static_cast<double>(cm.at(i, i)) / static_cast<double>(n);
    ++present;
  }
  if (present == 0) throw MetricError("uar: every row is zero");
  return sum / static_cast<double>(present);
}

double war(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw MetricError("war: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

EditCounts align_words(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditCounts e;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        e.substitutions += same ? 0 : 1;
        --i, --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++e.deletions;
      --i;
    } else {
      ++e.insertions;
      --j;
    }
  }
  return e;
}

double wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) throw MetricError("wer: empty reference");
  return static_cast<double>(align_words(ref, hyp).errors()) / static_cast<double>(ref.size());
}

double wer(std::string_view ref, std::string_view hyp) {
  return wer(normalize_words(ref), normalize_words(hyp));
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (const auto& x : a) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = x == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
               double beta) {
  if (ref.empty() || hyp.empty()) throw MetricError("rouge_l: empty input");
  if (!(beta > 0.0)) throw MetricError("rouge_l: beta must be positive");
  const auto l = static_cast<double>(lcs_length(ref, hyp));
  if (l == 0.0) return 0.0;
  const double r = l / static_cast<double>(ref.size());
  const double p = l / static_cast<double>(hyp.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * r * p / (r + b2 * p);
}

double rouge_l(std::string_view ref, std::string_view hyp, double beta) {
  return rouge_l(normalize_words(ref), normalize_words(hyp), beta);
}

namespace {

std::string label_string(const nlohmann::json& v, std::size_t line, const char* key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw MetricError("line " + std::to_string(line) + ": '" + key +
                    "' must be a string or an integer");
}

std::string field(const nlohmann::json& obj, const char* key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw MetricError("line " + std::to_string(line) + ": missing '" + key + "'");
  }
  return label_string(*it, line, key);
}

bool parse_int(const std::string& s, long long& out) {
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end;
}

// Integer labels sort numerically, anything else lexicographically.
std::vector<std::string> class_order(const std::vector<LabelPrediction>& rows) {
  std::vector<std::string> names;
  for (const auto& r : rows) {
    names.push_back(r.truth);
    names.push_back(r.pred);
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  long long a = 0, b = 0;
  const bool numeric =
      std::all_of(names.begin(), names.end(), [&](const auto& s) { return parse_int(s, a); });
  if (numeric) {
    std::sort(names.begin(), names.end(), [&](const auto& x, const auto& y) {
      parse_int(x, a);
      parse_int(y, b);
      return a < b;
    });
  }
  return names;
}

}  // namespace

PredictionSet read_predictions(std::istream& in) {
  PredictionSet out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw MetricError("line " + std::to_string(number) + ": " + e.what());
    }
    if (!obj.is_object()) throw MetricError("line " + std::to_string(number) + ": not an object");
    const std::string id = obj.contains("id") ? field(obj, "id", number) : std::to_string(number);
    if (obj.contains("ref") || obj.contains("hyp")) {
      out.text.push_back({id, field(obj, "ref", number), field(obj, "hyp", number)});
    } else if (obj.contains("true_label") || obj.contains("pred_label")) {
      out.labels.push_back(
          {id, field(obj, "true_label", number), field(obj, "pred_label", number)});
    } else {
      throw MetricError("line " + std::to_string(number) +
                        ": expected ref/hyp or true_label/pred_label");
    }
  }
  return out;
}

double EvalReport::metric(std::string_view name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return m.value;
  }
  throw MetricError("report has no metric '" + std::string(name) + "'");
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "metric,value\n";
  char buf[64];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%.10g", m.value);
    out << m.name << ',' << buf << '\n';
  }
}

void EvalReport::write_table(std::ostream& out) const {
  std::size_t width = 6;
  for (const auto& m : metrics) width = std::max(width, m.name.size());
  out << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
  out << std::string(width, '-') << "  " << std::string(10, '-') << '\n';
  for (const auto& m : metrics) {
    out << std::left << std::setw(static_cast<int>(width)) << m.name << "  " << std::fixed
        << std::setprecision(4) << m.value << '\n';
  }
  out << std::defaultfloat;
  if (text_samples) out << "text samples: " << text_samples << '\n';
  if (label_samples) {
    out << "label samples: " << label_samples << " (" << class_names.size() << " classes)\n";
  }
}

EvalReport evaluate(const PredictionSet& predictions, double beta) {
  if (predictions.text.empty() && predictions.labels.empty()) {
    throw MetricError("evaluate: no predictions");
  }
  EvalReport report;
  if (!predictions.text.empty()) {
    std::size_t errors = 0, words = 0;
    double per_sample = 0.0, rouge = 0.0;
    for (const auto& p : predictions.text) {
      const auto ref = normalize_words(p.ref);
      const auto hyp = normalize_words(p.hyp);
      if (ref.empty()) throw MetricError("sample '" + p.id + "': empty reference");
      const auto e = align_words(ref, hyp);
      errors += e.errors();
      words += ref.size();
      per_sample += static_cast<double>(e.errors()) / static_cast<double>(ref.size());
      rouge += hyp.empty() ? 0.0 : rouge_l(ref, hyp, beta);
    }
    const auto n = static_cast<double>(predictions.text.size());
    report.text_samples = predictions.text.size();
    report.metrics.push_back({"wer", static_cast<double>(errors) / static_cast<double>(words)});
    report.metrics.push_back({"wer_mean", per_sample / n});
    report.metrics.push_back({"rouge_l", rouge / n});
  }
  if (!predictions.labels.empty()) {
    report.class_names = class_order(predictions.labels);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < report.class_names.size(); ++i) index[report.class_names[i]] = i;
    ConfusionMatrix cm(report.class_names.size());
    for (const auto& p : predictions.labels) cm.add(index.at(p.truth), index.at(p.pred));
    report.label_samples = predictions.labels.size();
    report.metrics.push_back({"uar", uar(cm)});
    report.metrics.push_back({"war", war(cm)});
  }
  return report;
}

}  // namespace omnifuse::eval
