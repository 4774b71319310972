// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "omnifuse/curation/curation.hpp"

namespace omnifuse::curation {

/// What a synthetic source video was built to exercise.
enum class SourceKind { kNormal, kSceneCut, kDuplicate, kLowRes, kStatic, kHyperactive };
std::string_view source_kind_name(SourceKind kind);

struct CorpusEntry {
  std::string id;
  SourceKind kind = SourceKind::kNormal;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t frames = 0;
  double fps = 8.0;
  std::size_t template_index = 0;  // duplicates reuse an earlier template
};

/// The bundled 50-source corpus: 24 normal, 6 with one scene cut, 6 near
/// duplicates of normal sources, 6 below 480p (2 of them also static),
/// 4 static and 4 hyperactive. Sources are "synth:<seed>/<index>".
class SyntheticCorpus : public FrameSource {
 public:
  static constexpr std::size_t kThumbWidth = 32;
  static constexpr std::size_t kThumbHeight = 18;

  explicit SyntheticCorpus(std::uint64_t seed);

  const std::vector<CorpusEntry>& entries() const { return entries_; }
  std::string source_of(std::size_t index) const;
  visual::VideoClip render(std::size_t index) const;
  visual::VideoClip load(std::string_view base) const override;

  /// Raw manifest, one record per source.
  Manifest raw_manifest() const;

  /// Drop counts the construction guarantees after screening.
  struct Expected {
    std::size_t clips_after_split = 0;
    std::size_t low_res = 0;
    std::size_t static_clips = 0;
    std::size_t hyperactive = 0;
    std::size_t duplicate = 0;
  };
  Expected expected() const;

 private:
  std::uint64_t seed_;
  std::vector<CorpusEntry> entries_;
};

/// Loads a directory of .png/.ppm frames and reduces it to grayscale
/// thumbnails `thumb_width` wide. A SyntheticCorpus, when given, serves
/// "synth:" references.
class DirectoryFrameSource : public FrameSource {
 public:
  explicit DirectoryFrameSource(std::size_t thumb_width = SyntheticCorpus::kThumbWidth,
                                const SyntheticCorpus* synthetic = nullptr)
      : thumb_width_(thumb_width), synthetic_(synthetic) {}
  visual::VideoClip load(std::string_view base) const override;

 private:
  std::size_t thumb_width_;
  const SyntheticCorpus* synthetic_;
};

}  // namespace omnifuse::curation
