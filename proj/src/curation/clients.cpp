// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/curation/clients.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <set>

#include "omnifuse/eval/metrics.hpp"
#include "omnifuse/numerics/layers.hpp"

namespace omnifuse::curation {

using visual::VideoClip;

std::string_view box_kind_name(BoxKind kind) {
  return kind == BoxKind::kPerson ? "person" : "face";
}

BoxKind parse_box_kind(std::string_view name) {
  if (name == "person") return BoxKind::kPerson;
  if (name == "face") return BoxKind::kFace;
  throw ClientError("unknown box kind '" + std::string(name) + "'");
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    const auto b = cur.find_first_not_of(" \t\r\n");
    if (b != std::string::npos) {
      const auto e = cur.find_last_not_of(" \t\r\n");
      out.push_back(cur.substr(b, e - b + 1));
    }
    cur.clear();
  };
  for (char c : text) {
    cur.push_back(c);
    if (c == '.' || c == '!' || c == '?') flush();
  }
  flush();
  return out;
}

double token_jaccard(std::string_view a, std::string_view b) {
  const auto wa = eval::normalize_words(a);
  const auto wb = eval::normalize_words(b);
  const std::set<std::string> sa(wa.begin(), wa.end()), sb(wb.begin(), wb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& w : sa) common += sb.count(w);
  return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

namespace {

constexpr double kSubjectContrast = 0.2;

double pixel(const VideoClip& g, std::size_t t, std::size_t y, std::size_t x) {
  return g.at(t, y, x, 0);
}

double border_mean(const VideoClip& g, std::size_t t) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t x = 0; x < g.width; ++x) {
    s += pixel(g, t, 0, x) + pixel(g, t, g.height - 1, x);
    n += 2;
  }
  for (std::size_t y = 1; y + 1 < g.height; ++y) {
    s += pixel(g, t, y, 0) + pixel(g, t, y, g.width - 1);
    n += 2;
  }
  return s / static_cast<double>(n);
}

struct Extent {
  bool any = false;
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
  double cx = 0.0;
  std::size_t area = 0;
};

Extent subject_extent(const VideoClip& g, std::size_t t, double background) {
  Extent e;
  double sx = 0.0;
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) {
      if (std::abs(pixel(g, t, y, x) - background) <= kSubjectContrast) continue;
      if (!e.any) {
        e = {true, x, y, x, y, 0.0, 0};
      }
      e.x0 = std::min(e.x0, x), e.x1 = std::max(e.x1, x);
      e.y0 = std::min(e.y0, y), e.y1 = std::max(e.y1, y);
      sx += static_cast<double>(x) + 0.5;
      ++e.area;
    }
  }
  if (e.any) e.cx = sx / static_cast<double>(e.area);
  return e;
}

void require_gray(const VideoClip& g) {
  if (g.frames == 0 || g.channels != 1 || g.width < 3 || g.height < 3) {
    throw ClientError("mock client expects non-empty grayscale thumbnails");
  }
}

std::string_view background_word(double bg) {
  if (bg < 0.25) return "dark";
  if (bg < 0.5) return "dim";
  if (bg < 0.7) return "light";
  return "bright";
}

std::string_view position_word(double x) {
  if (x < 1.0 / 3.0) return "left";
  if (x < 2.0 / 3.0) return "center";
  return "right";
}

std::string_view motion_phrase(double drift) {
  if (drift < -0.05) return "moves leftward";
  if (drift > 0.05) return "moves rightward";
  return "stays still";
}

std::string_view size_word(double area) { return area < 0.1 ? "small" : "large"; }

constexpr std::array<std::string_view, 8> kHallucinations{
    "a dog barks in the distance.", "the person wears a red hat.",
    "music plays softly.",          "a car passes behind them.",
    "it is raining outside.",       "a second person waves.",
    "the person holds a cup.",      "a bird flies overhead."};

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ClipFeatures clip_features(const VideoClip& gray) {
  require_gray(gray);
  ClipFeatures f;
  f.background = border_mean(gray, 0);
  const Extent first = subject_extent(gray, 0, f.background);
  if (!first.any) return f;
  const double w = static_cast<double>(gray.width);
  f.has_subject = true;
  f.subject_x = first.cx / w;
  f.subject_area = static_cast<double>(first.area) / (w * static_cast<double>(gray.height));
  const Extent last = subject_extent(gray, gray.frames - 1, border_mean(gray, gray.frames - 1));
  if (last.any) f.drift = (last.cx - first.cx) / w;
  return f;
}

std::string MockCaptioner::caption(const CaptionRequest& request) const {
  if (request.frames == nullptr) throw ClientError("caption request without frames");
  const ClipFeatures f = clip_features(*request.frames);
  const std::string bg(background_word(f.background));
  if (request.style == CaptionStyle::kBrief) {
    if (!f.has_subject) return "an empty " + bg + " scene";
    return "a " + std::string(size_word(f.subject_area)) + " person " +
           std::string(motion_phrase(f.drift)) + " on the " +
           std::string(position_word(f.subject_x)) + " side of a " + bg + " scene";
  }
  // Detailed: the observable sentences every model agrees on, plus one
  // model-specific invention.
  std::vector<std::string> sentences;
  if (f.has_subject) {
    sentences.push_back("a " + std::string(size_word(f.subject_area)) + " person is on the " +
                        std::string(position_word(f.subject_x)) + " side.");
    sentences.push_back("the person " + std::string(motion_phrase(f.drift)) + ".");
  } else {
    sentences.push_back("the scene is empty.");
  }
  const auto pick = derive_seed(seed_, request.model + "/" + request.clip_id) % kHallucinations.size();
  sentences.insert(sentences.begin() + 1, std::string(kHallucinations[pick]));
  sentences.push_back("the background is " + bg + ".");
  std::string out;
  for (const auto& s : sentences) out += (out.empty() ? "" : " ") + s;
  return out;
}

std::vector<double> MockEmbedder::embed(std::string_view text) const {
  const auto words = eval::normalize_words(text);
  if (words.empty()) throw ClientError("embed: empty text");
  if (dim_ == 0) throw ClientError("embed: zero dimension");
  std::vector<double> v(dim_, 0.0);
  const std::uint64_t salt = fnv1a(std::to_string(seed_));
  for (const auto& w : words) {
    const std::uint64_t h = fnv1a(w, salt);
    v[(h >> 1) % dim_] += (h & 1) ? 1.0 : -1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  // Every word may have cancelled out; fall back to a fixed axis.
  if (norm == 0.0) {
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

std::string MockSummarizer::summarize(const std::vector<std::string>& captions) const {
  if (captions.size() < 2) throw ClientError("summarize: need at least two captions");
  std::vector<std::vector<std::string>> split;
  for (const auto& c : captions) split.push_back(split_sentences(c));
  std::string out;
  for (const auto& s : split.front()) {
    const bool everywhere = std::all_of(split.begin() + 1, split.end(), [&](const auto& other) {
      return std::any_of(other.begin(), other.end(),
                         [&](const auto& t) { return token_jaccard(s, t) >= jaccard_; });
    });
    if (everywhere) out += (out.empty() ? "" : " ") + s;
  }
  return out;
}

std::vector<Box> MockDetector::detect(const std::string& /*clip_id*/, const VideoClip& frames,
                                      std::size_t width, std::size_t height) const {
  require_gray(frames);
  if (width == 0 || height == 0) throw ClientError("detect: zero resolution");
  const double sx = static_cast<double>(width) / static_cast<double>(frames.width);
  const double sy = static_cast<double>(height) / static_cast<double>(frames.height);
  std::vector<std::size_t> picks{0, frames.frames / 2, frames.frames - 1};
  picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
  std::vector<Box> boxes;
  for (std::size_t t : picks) {
    const Extent e = subject_extent(frames, t, border_mean(frames, t));
    if (!e.any) continue;
    auto clamp_x = [&](double v) {
      return std::clamp<std::int64_t>(std::llround(v), 0, static_cast<std::int64_t>(width));
    };
    auto clamp_y = [&](double v) {
      return std::clamp<std::int64_t>(std::llround(v), 0, static_cast<std::int64_t>(height));
    };
    const auto x0 = clamp_x(static_cast<double>(e.x0) * sx);
    const auto x1 = clamp_x(static_cast<double>(e.x1 + 1) * sx);
    const auto y0 = clamp_y(static_cast<double>(e.y0) * sy);
    const auto y1 = clamp_y(static_cast<double>(e.y1 + 1) * sy);
    const Box person{t, BoxKind::kPerson, x0, y0, x1 - x0, y1 - y0};
    boxes.push_back(person);
    boxes.push_back({t, BoxKind::kFace, person.x + person.w / 4, person.y, person.w / 2,
                     person.h / 4});
  }
  return boxes;
}

ClientSet make_mock_clients(std::uint64_t seed, std::size_t embed_dim, double jaccard) {
  return {std::make_shared<MockCaptioner>(seed), std::make_shared<MockEmbedder>(seed, embed_dim),
          std::make_shared<MockSummarizer>(jaccard), std::make_shared<MockDetector>()};
}

}  // namespace omnifuse::curation
