// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic three-aspect corpus. Each clip carries three independent cues,
// one per colour channel:
//   R  face:        a static 16x16 texture (horizontal, vertical, checker)
//   G  body:        a 16x16 blob moving right, left, or down
//   B  interaction: two 2x16 dots in one cell that approach, separate, or follow
// A sample asks about one aspect, so only that channel determines its answer.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "omnifuse/training/stages.hpp"

namespace omnifuse::training {

using visual::BranchId;
using visual::VideoClip;

namespace {

constexpr std::size_t kFaceChannel = 0;
constexpr std::size_t kBodyChannel = 1;
constexpr std::size_t kInterChannel = 2;
constexpr double kOn = 0.9;
constexpr std::size_t kCell = 16;
constexpr std::size_t kBodyStep = 8;
constexpr std::size_t kDotWidth = 2;   // interaction dots
constexpr std::size_t kDotHeight = 16;
constexpr long kDotStep = 2;

std::size_t channel_of(BranchId b) {
  switch (b) {
    case BranchId::kFace: return kFaceChannel;
    case BranchId::kBody: return kBodyChannel;
    case BranchId::kInteraction: return kInterChannel;
  }
  return kFaceChannel;
}

bool texture_on(std::size_t label, std::size_t u, std::size_t v) {
  switch (label) {
    case 0: return (v / 2) % 2 == 0;            // horizontal stripes
    case 1: return (u / 2) % 2 == 0;            // vertical stripes
    default: return ((u / 2) + (v / 2)) % 2 == 0;  // checker
  }
}

void fill_rect(VideoClip& clip, std::size_t t, std::size_t ch, std::size_t x, std::size_t y,
               std::size_t w, std::size_t h) {
  for (std::size_t yy = y; yy < y + h && yy < clip.height; ++yy) {
    for (std::size_t xx = x; xx < x + w && xx < clip.width; ++xx) clip.at(t, yy, xx, ch) = kOn;
  }
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi, std::size_t step) {
  // Uniform multiple of `step` in [lo, hi].
  const std::size_t n = (hi - lo) / step;
  return lo + step * std::uniform_int_distribution<std::size_t>(0, n)(rng);
}

void draw_face(VideoClip& clip, std::size_t label, Rng& rng) {
  const std::size_t cells = clip.width / kCell;
  const std::size_t cx = std::uniform_int_distribution<std::size_t>(0, cells - 1)(rng);
  const std::size_t cy = std::uniform_int_distribution<std::size_t>(0, cells - 1)(rng);
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t v = 0; v < kCell; ++v) {
      for (std::size_t u = 0; u < kCell; ++u) {
        if (texture_on(label, u, v)) clip.at(t, cy * kCell + v, cx * kCell + u, kFaceChannel) = kOn;
      }
    }
  }
}

void draw_body(VideoClip& clip, std::size_t label, Rng& rng) {
  const std::size_t travel = (clip.frames - 1) * kBodyStep;
  const std::size_t span = clip.width - kCell;
  std::size_t x = pick(rng, 0, span, kBodyStep);
  std::size_t y = pick(rng, 0, span, kBodyStep);
  if (label == 0) x = pick(rng, 0, span - travel, kBodyStep);
  if (label == 1) x = pick(rng, travel, span, kBodyStep);
  if (label == 2) y = pick(rng, 0, span - travel, kBodyStep);
  for (std::size_t t = 0; t < clip.frames; ++t) {
    const std::size_t d = t * kBodyStep;
    const std::size_t fx = label == 0 ? x + d : label == 1 ? x - d : x;
    const std::size_t fy = label == 2 ? y + d : y;
    fill_rect(clip, t, kBodyChannel, fx, fy, kCell, kCell);
  }
}

void draw_interaction(VideoClip& clip, std::size_t label, Rng& rng) {
  // Both dots live in one cell: dot A in its left half, dot B in its right
  // half, each moving kDotStep pixels per frame.
  const std::size_t cells = clip.width / kCell;
  const std::size_t cx = std::uniform_int_distribution<std::size_t>(0, cells - 1)(rng) * kCell;
  const std::size_t cy = std::uniform_int_distribution<std::size_t>(0, cells - 1)(rng) * kCell;
  const long last = static_cast<long>(clip.frames - 1) * kDotStep;
  long a0 = 0, b0 = 0, da = 0, db = 0;
  if (label == 0) {  // approaching
    a0 = 0, b0 = static_cast<long>(kCell - kDotWidth), da = 1, db = -1;
  } else if (label == 1) {  // separating
    a0 = last, b0 = static_cast<long>(kCell - kDotWidth) - last, da = -1, db = 1;
  } else if (std::bernoulli_distribution(0.5)(rng)) {  // following, rightwards
    a0 = 0, b0 = static_cast<long>(kCell / 2), da = db = 1;
  } else {  // following, leftwards
    a0 = last, b0 = static_cast<long>(kCell - kDotWidth), da = db = -1;
  }
  for (std::size_t t = 0; t < clip.frames; ++t) {
    const long shift = static_cast<long>(t) * kDotStep;
    fill_rect(clip, t, kInterChannel, cx + static_cast<std::size_t>(a0 + da * shift), cy,
              kDotWidth, kDotHeight);
    fill_rect(clip, t, kInterChannel, cx + static_cast<std::size_t>(b0 + db * shift), cy,
              kDotWidth, kDotHeight);
  }
}

audio::AudioWave make_tone(std::size_t label, double seconds, Rng& rng) {
  audio::AudioWave wave;
  const auto n = static_cast<std::size_t>(std::lround(seconds * audio::kSampleRate));
  wave.samples.resize(n);
  std::normal_distribution<double> noise(0.0, 0.01);
  const double w = 2.0 * std::numbers::pi * tone_hz(label) / audio::kSampleRate;
  for (std::size_t i = 0; i < n; ++i) {
    wave.samples[i] = std::clamp(0.5 * std::sin(w * static_cast<double>(i)) + noise(rng), -1.0, 1.0);
  }
  return wave;
}

}  // namespace

std::string_view label_word(BranchId family, std::size_t label) {
  static const std::array<std::array<std::string_view, 3>, 3> words{{
      {"happy", "sad", "angry"},
      {"walking", "running", "falling"},
      {"approaching", "separating", "following"},
  }};
  if (label >= 3) throw TrainingError("label out of range");
  return words[static_cast<std::size_t>(family)][label];
}

const std::vector<std::string>& instruction_templates(BranchId family) {
  static const std::array<std::vector<std::string>, 3> templates{{
      {"What emotion does the person show?", "Describe the facial expression of the person.",
       "How does the person feel?", "What kind of expression is shown?"},
      {"What action is the person doing?", "Describe the body movement of the person.",
       "How is the person moving?", "What kind of motion does the person make?"},
      {"How do the two people interact?", "Describe the interaction between the people.",
       "What social interaction is shown?", "What are the two people doing together?"},
  }};
  return templates[static_cast<std::size_t>(family)];
}

double tone_hz(std::size_t label) {
  static constexpr std::array<double, 3> hz{400.0, 1000.0, 2500.0};
  if (label >= hz.size()) throw TrainingError("label out of range");
  return hz[label];
}

void DataSpec::validate() const {
  if (classes < 2 || classes > 3) throw TrainingError("data spec: classes must be 2 or 3");
  if (per_family == 0) throw TrainingError("data spec: per_family must be positive");
  if (families.empty()) throw TrainingError("data spec: no families");
  if (!(av_fraction >= 0.0 && av_fraction <= 1.0)) {
    throw TrainingError("data spec: av_fraction must lie in [0, 1]");
  }
  if (!(blank_prob >= 0.0 && blank_prob <= 1.0)) {
    throw TrainingError("data spec: blank_prob must lie in [0, 1]");
  }
  if (frames < 2 || frames > 4) throw TrainingError("data spec: frames must lie in [2, 4]");
  if (size != 64) throw TrainingError("data spec: clip size must be 64");
  if (!(noise >= 0.0 && noise < 0.2)) throw TrainingError("data spec: noise must lie in [0, 0.2)");
  if (!(audio_seconds > 0.0 && audio_seconds <= 30.0)) {
    throw TrainingError("data spec: audio_seconds must lie in (0, 30]");
  }
}

std::vector<SyntheticSample> make_synthetic_dataset(const DataSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> label_dist(0, spec.classes - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise);

  std::vector<SyntheticSample> out;
  for (BranchId family : spec.families) {
    const auto& templates = instruction_templates(family);
    for (std::size_t i = 0; i < spec.per_family; ++i) {
      SyntheticSample s;
      s.id = std::string(visual::branch_name(family)) + "-" + std::to_string(i);
      s.family = family;
      for (auto& l : s.aspect_labels) l = label_dist(rng);
      s.label = s.aspect_labels[static_cast<std::size_t>(family)];
      s.answer = std::string(label_word(family, s.label));
      s.instruction = templates[std::uniform_int_distribution<std::size_t>(0, templates.size() - 1)(rng)];
      s.has_audio = unit(rng) < spec.av_fraction;
      s.cue_blanked = s.has_audio && unit(rng) < spec.blank_prob;

      VideoClip clip = VideoClip::blank(spec.frames, spec.size, spec.size);
      clip.fps = 4.0;
      for (BranchId aspect : visual::kAllBranches) {
        if (s.cue_blanked && aspect == family) continue;
        const std::size_t l = s.aspect_labels[static_cast<std::size_t>(aspect)];
        if (aspect == BranchId::kFace) draw_face(clip, l, rng);
        if (aspect == BranchId::kBody) draw_body(clip, l, rng);
        if (aspect == BranchId::kInteraction) draw_interaction(clip, l, rng);
      }
      for (double& p : clip.pixels) p = std::clamp(p + noise(rng), 0.0, 1.0);
      s.clip = std::move(clip);
      if (s.has_audio) s.wave = make_tone(s.label, spec.audio_seconds, rng);
      out.push_back(std::move(s));
    }
  }
  const std::size_t primaries = out.size();
  for (std::size_t i = 0; i < primaries; ++i) {
    if (!out[i].has_audio) continue;
    SyntheticSample twin = out[i];
    twin.id += "-noaudio";
    twin.wave.reset();
    twin.has_audio = false;
    twin.twin_of = i;
    out.push_back(std::move(twin));
  }
  return out;
}

std::size_t oracle_classify(const VideoClip& clip, BranchId aspect, std::size_t classes) {
  const std::size_t ch = channel_of(aspect);
  const std::size_t last = clip.frames - 1;
  if (aspect == BranchId::kFace) {
    // Exhaustive template match over every cell-aligned position.
    double best = -1e300;
    std::size_t best_label = 0;
    for (std::size_t label = 0; label < classes; ++label) {
      for (std::size_t cy = 0; cy + kCell <= clip.height; cy += kCell) {
        for (std::size_t cx = 0; cx + kCell <= clip.width; cx += kCell) {
          double score = 0.0;
          for (std::size_t v = 0; v < kCell; ++v) {
            for (std::size_t u = 0; u < kCell; ++u) {
              const double sign = texture_on(label, u, v) ? 1.0 : -1.0;
              score += sign * clip.at(0, cy + v, cx + u, ch);
            }
          }
          if (score > best) {
            best = score;
            best_label = label;
          }
        }
      }
    }
    return best_label;
  }

  auto mass = [&](std::size_t t, double& mx, double& my, double& lo, double& hi) {
    double total = 0.0, sx = 0.0, sy = 0.0;
    lo = static_cast<double>(clip.width);
    hi = -1.0;
    for (std::size_t y = 0; y < clip.height; ++y) {
      for (std::size_t x = 0; x < clip.width; ++x) {
        const double v = clip.at(t, y, x, ch);
        if (v < 0.5) continue;
        total += v;
        sx += v * static_cast<double>(x);
        sy += v * static_cast<double>(y);
        lo = std::min(lo, static_cast<double>(x));
        hi = std::max(hi, static_cast<double>(x));
      }
    }
    mx = total > 0 ? sx / total : 0.0;
    my = total > 0 ? sy / total : 0.0;
    return total > 0;
  };
  double x0, y0, lo0, hi0, x1, y1, lo1, hi1;
  if (!mass(0, x0, y0, lo0, hi0) || !mass(last, x1, y1, lo1, hi1)) return 0;
  std::array<double, 3> score{};
  if (aspect == BranchId::kBody) {
    score = {x1 - x0, x0 - x1, y1 - y0};
  } else {
    const double change = (hi1 - lo1) - (hi0 - lo0);
    score = {-change, change, -std::abs(change) + 0.5};
  }
  return static_cast<std::size_t>(std::max_element(score.begin(), score.begin() +
                                                       static_cast<std::ptrdiff_t>(classes)) -
                                  score.begin());
}

OracleReport oracle_report(const std::vector<SyntheticSample>& samples, std::size_t classes) {
  OracleReport r;
  std::size_t match_hits = 0, other_hits = 0, other_total = 0;
  for (const auto& s : samples) {
    if (s.cue_blanked || s.twin_of) continue;
    ++r.scored;
    for (BranchId aspect : visual::kAllBranches) {
      const bool hit = oracle_classify(s.clip, aspect, classes) == s.label;
      if (aspect == s.family) {
        match_hits += hit;
      } else {
        other_hits += hit;
        ++other_total;
      }
    }
  }
  if (r.scored == 0) return r;
  r.matching = static_cast<double>(match_hits) / static_cast<double>(r.scored);
  r.non_matching = static_cast<double>(other_hits) / static_cast<double>(other_total);
  return r;
}

}  // namespace omnifuse::training
