// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

// Thumbnails are 32x18 grayscale at 8 fps. A subject is a uniform rectangle
// 0.5 brighter or darker than the background, drifting 1 px every 6 frames.
// A "gesture" shifts it sideways by its own width for a single frame, which
// gives one difference peak between the keyframe and scene thresholds.

#include "omnifuse/curation/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <random>

#include "omnifuse/numerics/layers.hpp"

namespace omnifuse::curation {

using visual::VideoClip;

std::string_view source_kind_name(SourceKind kind) {
  switch (kind) {
    case SourceKind::kNormal: return "normal";
    case SourceKind::kSceneCut: return "scene_cut";
    case SourceKind::kDuplicate: return "duplicate";
    case SourceKind::kLowRes: return "low_res";
    case SourceKind::kStatic: return "static";
    case SourceKind::kHyperactive: return "hyperactive";
  }
  return "?";
}

namespace {

constexpr std::size_t kW = SyntheticCorpus::kThumbWidth;
constexpr std::size_t kH = SyntheticCorpus::kThumbHeight;
constexpr std::size_t kFrames = 24;
constexpr double kFps = 8.0;
constexpr double kNoise = 0.01;
constexpr std::size_t kNormal = 24, kCut = 6, kDup = 6, kLowRes = 6, kStatic = 4, kHyper = 4;

struct Subject {
  std::size_t pos = 0;   // 0 left, 1 center, 2 right
  bool large = false;
  int drift = 1;         // +1 right, -1 left, 0 still
  double background = 0.1;
};

std::size_t subject_w(const Subject& s) { return s.large ? 8 : 6; }
std::size_t subject_h(const Subject& s) { return s.large ? 12 : 8; }

long start_x(const Subject& s) {
  const long w = static_cast<long>(subject_w(s));
  switch (s.pos) {
    case 0: return 5;
    case 1: return (static_cast<long>(kW) - w) / 2;
    default: return static_cast<long>(kW) - w - 5;
  }
}

/// 24 distinct captions: position x size x drift x {dark, bright}.
Subject normal_template(std::size_t k) {
  return {k % 3, (k / 3) % 2 == 1, (k / 6) % 2 == 0 ? 1 : -1, (k / 12) % 2 == 0 ? 0.1 : 0.85};
}

void paint(VideoClip& clip, std::size_t t, const Subject& s, long x, double value) {
  const std::size_t h = subject_h(s);
  const std::size_t y0 = (kH - h) / 2;
  for (std::size_t y = y0; y < y0 + h; ++y) {
    for (long xx = x; xx < x + static_cast<long>(subject_w(s)); ++xx) {
      if (xx >= 0 && xx < static_cast<long>(kW)) clip.at(t, y, static_cast<std::size_t>(xx), 0) = value;
    }
  }
}

double subject_value(double background) { return background < 0.5 ? background + 0.5 : background - 0.5; }

/// Frames [t0, t0 + n) of `clip` showing a drifting subject with gestures at
/// the given offsets.
void render_segment(VideoClip& clip, std::size_t t0, std::size_t n, const Subject& s,
                    const std::vector<std::size_t>& gestures) {
  const long w = static_cast<long>(subject_w(s));
  const long toward_center = s.pos == 2 ? -w : w;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = t0 + k;
    for (std::size_t y = 0; y < kH; ++y) {
      for (std::size_t x = 0; x < kW; ++x) clip.at(t, y, x, 0) = s.background;
    }
    long x = start_x(s) + s.drift * static_cast<long>((k + 1) / 6);
    if (std::find(gestures.begin(), gestures.end(), k) != gestures.end()) x += toward_center;
    paint(clip, t, s, x, subject_value(s.background));
  }
}

void add_noise(VideoClip& clip, Rng& rng) {
  std::normal_distribution<double> noise(0.0, kNoise);
  for (double& p : clip.pixels) p = std::clamp(p + noise(rng), 0.0, 1.0);
}

}  // namespace

SyntheticCorpus::SyntheticCorpus(std::uint64_t seed) : seed_(seed) {
  auto add = [&](SourceKind kind, std::size_t w, std::size_t h, std::size_t tmpl) {
    char id[16];
    std::snprintf(id, sizeof id, "clip_%03zu", entries_.size());
    entries_.push_back({id, kind, w, h, kFrames, kFps, tmpl});
  };
  for (std::size_t k = 0; k < kNormal; ++k) {
    // Every fourth one sits exactly on the 480-line boundary.
    if (k % 4 == 3) {
      add(SourceKind::kNormal, 854, 480, k);
    } else {
      add(SourceKind::kNormal, 1280, 720, k);
    }
  }
  for (std::size_t k = 0; k < kCut; ++k) add(SourceKind::kSceneCut, 1920, 1080, k);
  for (std::size_t k = 0; k < kDup; ++k) add(SourceKind::kDuplicate, 1280, 720, (4 * k) % kNormal);
  for (std::size_t k = 0; k < kLowRes; ++k) add(SourceKind::kLowRes, 640, 360, k);
  for (std::size_t k = 0; k < kStatic; ++k) add(SourceKind::kStatic, 1280, 720, k);
  for (std::size_t k = 0; k < kHyper; ++k) add(SourceKind::kHyperactive, 1920, 1080, k);
}

std::string SyntheticCorpus::source_of(std::size_t index) const {
  return "synth:" + std::to_string(seed_) + "/" + std::to_string(index);
}

VideoClip SyntheticCorpus::render(std::size_t index) const {
  if (index >= entries_.size()) throw CurationError("synthetic source out of range");
  const CorpusEntry& e = entries_[index];
  VideoClip clip = VideoClip::blank(e.frames, kH, kW, 1);
  clip.fps = e.fps;
  clip.source_width = e.width;
  clip.source_height = e.height;
  const std::vector<std::size_t> gestures{7, 17};
  switch (e.kind) {
    case SourceKind::kNormal:
    case SourceKind::kDuplicate:
      render_segment(clip, 0, e.frames, normal_template(e.template_index), gestures);
      break;
    case SourceKind::kLowRes:
      if (e.template_index < 4) {
        render_segment(clip, 0, e.frames, normal_template(e.template_index), gestures);
      } else {
        Subject s = normal_template(e.template_index);
        s.drift = 0;
        render_segment(clip, 0, e.frames, s, {});
      }
      break;
    case SourceKind::kSceneCut: {
      // Dim then light backgrounds keep these captions apart from the
      // normal sources; the jump between them is the cut.
      const std::size_t half = e.frames / 2;
      Subject a{e.template_index % 3, (e.template_index / 3) % 2 == 1, 1, 0.3};
      Subject b{e.template_index % 3, (e.template_index / 3) % 2 == 1, -1, 0.65};
      render_segment(clip, 0, half, a, {5});
      render_segment(clip, half, e.frames - half, b, {5});
      break;
    }
    case SourceKind::kStatic: {
      Subject s = normal_template(e.template_index);
      s.drift = 0;
      render_segment(clip, 0, e.frames, s, {});
      break;
    }
    case SourceKind::kHyperactive: {
      // The subject vanishes every third frame: one peak per three frames.
      Subject s = normal_template(e.template_index);
      s.large = true;
      s.drift = 0;
      render_segment(clip, 0, e.frames, s, {});
      for (std::size_t t = 2; t < e.frames; t += 3) {
        for (std::size_t y = 0; y < kH; ++y) {
          for (std::size_t x = 0; x < kW; ++x) clip.at(t, y, x, 0) = s.background;
        }
      }
      break;
    }
  }
  Rng rng(derive_seed(seed_, "corpus/" + e.id));
  add_noise(clip, rng);
  return clip;
}

VideoClip SyntheticCorpus::load(std::string_view base) const {
  const std::string prefix = "synth:" + std::to_string(seed_) + "/";
  if (!base.starts_with(prefix)) {
    throw CurationError("source '" + std::string(base) + "' is not part of this corpus");
  }
  std::size_t index = 0;
  const auto rest = base.substr(prefix.size());
  const auto r = std::from_chars(rest.data(), rest.data() + rest.size(), index);
  if (r.ec != std::errc() || r.ptr != rest.data() + rest.size()) {
    throw CurationError("bad synthetic source '" + std::string(base) + "'");
  }
  return render(index);
}

Manifest SyntheticCorpus::raw_manifest() const {
  Manifest m;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    ClipRecord r;
    r.id = e.id;
    r.source = source_of(i);
    r.width = e.width;
    r.height = e.height;
    r.frame_count = e.frames;
    r.fps = e.fps;
    m.records.push_back(std::move(r));
  }
  return m;
}

SyntheticCorpus::Expected SyntheticCorpus::expected() const {
  Expected x;
  for (const auto& e : entries_) {
    x.clips_after_split += e.kind == SourceKind::kSceneCut ? 2 : 1;
    x.low_res += e.kind == SourceKind::kLowRes;
    x.static_clips += e.kind == SourceKind::kStatic;
    x.hyperactive += e.kind == SourceKind::kHyperactive;
    x.duplicate += e.kind == SourceKind::kDuplicate;
  }
  return x;
}

VideoClip DirectoryFrameSource::load(std::string_view base) const {
  if (synthetic_ != nullptr && base.starts_with("synth:")) return synthetic_->load(base);
  VideoClip clip = visual::read_frames_dir(std::filesystem::path(std::string(base)));
  const std::size_t factor = std::max<std::size_t>(1, clip.width / std::max<std::size_t>(1, thumb_width_));
  return to_gray(clip, factor);
}

}  // namespace omnifuse::curation
