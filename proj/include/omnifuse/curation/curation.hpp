// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "omnifuse/curation/clients.hpp"
#include "omnifuse/visual/visual.hpp"

namespace omnifuse::curation {

class CurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Single-channel copy of a clip, box-averaged by `factor` in both axes.
visual::VideoClip to_gray(const visual::VideoClip& clip, std::size_t factor = 1);

/// Mean absolute difference between frames a and b of a grayscale clip.
double frame_difference(const visual::VideoClip& gray, std::size_t a, std::size_t b);

/// Start indices of every segment after the first. A cut is placed at i when
/// frame_difference(i - 1, i) > tau; segments shorter than min_len are then
/// merged into the segment before them (a short first segment is merged
/// into the one after it).
std::vector<std::size_t> detect_scenes(const visual::VideoClip& gray, double tau,
                                       std::size_t min_len);

/// Local maxima of the inter-frame difference above tau, plus the first
/// frame. A plateau counts once.
std::size_t count_keyframes(const visual::VideoClip& gray, double tau);

enum class ClipStatus { kRaw, kSplit, kKept, kDropped };
enum class DropReason { kLowRes, kStatic, kHyperactive, kDuplicate, kClientError };

std::string_view status_name(ClipStatus status);
ClipStatus parse_status(std::string_view name);
std::string_view reason_name(DropReason reason);
DropReason parse_reason(std::string_view name);

struct FilterRules {
  std::size_t min_height = 480;
  std::size_t min_keyframes = 2;
  double max_keyframe_rate = 2.5;  // keyframes per second
};

struct ClipRecord {
  std::string id;
  std::string source;  // frame-sequence reference, optionally "#start:end"
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t frame_count = 0;
  double fps = 0.0;
  std::optional<std::string> brief_caption;
  std::vector<std::string> detailed_captions;
  std::optional<std::string> final_caption;
  std::vector<Box> boxes;
  ClipStatus status = ClipStatus::kRaw;
  std::optional<DropReason> reason;   // set exactly when dropped
  std::optional<std::size_t> keyframes;
  bool needs_review = false;          // consensus came back empty

  /// Throws CurationError when a dropped record lacks a reason (or a live
  /// one has one) or a box leaves the frame.
  void validate() const;
  bool operator==(const ClipRecord&) const = default;
};

/// Order of the checks: resolution, then static, then hyperactive.
std::optional<DropReason> filter_clip(const ClipRecord& record, std::size_t keyframes,
                                      const FilterRules& rules);

/// Greedy pass in id order. A record is dropped when its cosine similarity
/// to an already kept record reaches tau (within 1e-12), so identical
/// captions are removed even at tau = 1. Returns the kept ids.
std::vector<std::string> dedup(const std::vector<ClipRecord>& records,
                               const EmbedderClient& embedder, double tau);
/// Same rule over precomputed unit vectors; returns kept indices.
std::vector<std::size_t> dedup_vectors(const std::vector<std::vector<double>>& embeddings,
                                       double tau);

/// Needs at least two captions; client failures propagate.
std::string consensus_caption(const std::vector<std::string>& detailed,
                              const SummarizerClient& summarizer);

std::string record_to_json(const ClipRecord& record);
ClipRecord record_from_json(std::string_view line);

// Stage names double as watermarks: the manifest after stage k is stored as
// "<dir>/<name>.jsonl" and state.json records the last finished one.
inline constexpr std::string_view kStageRaw = "raw";
inline constexpr std::string_view kStageSplit = "split";
inline constexpr std::string_view kStageScreen = "screen";
inline constexpr std::string_view kStageDedup = "dedup";
inline constexpr std::string_view kStageAnnotate = "annotate";
const std::vector<std::string_view>& stage_order();

struct Manifest {
  std::vector<ClipRecord> records;
  std::string watermark{kStageRaw};
  std::string config_hash;
};

void write_jsonl(const std::filesystem::path& path, const std::vector<ClipRecord>& records);
std::vector<ClipRecord> read_jsonl(const std::filesystem::path& path);

struct CurationConfig {
  double tau_scene = 0.3;
  std::size_t min_scene_len = 6;
  double tau_key = 0.05;
  FilterRules rules;
  double tau_sim = 0.95;
  double consensus_jaccard = 0.8;
  std::vector<std::string> detailed_models{"alpha", "beta"};
  std::size_t embed_dim = 256;
  std::uint64_t seed = 2024;
  std::string clients = "mock";  // or "http"
  HttpClientConfig http;
  std::size_t workers = 0;       // 0: hardware concurrency; not part of the hash

  void validate() const;
};

/// Canonical JSON (sorted keys) of every field that can change the output.
std::string canonical_config(const CurationConfig& config);
/// Lowercase hex SHA-256 of canonical_config.
std::string config_hash(const CurationConfig& config);
std::string sha256_hex(std::string_view data);

/// Resolves a source reference to grayscale thumbnails.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual visual::VideoClip load(std::string_view base) const = 0;
};

/// Splits "base#start:end" and slices the loaded frames.
visual::VideoClip load_frames(const FrameSource& source, std::string_view reference);

ClientSet make_clients(const CurationConfig& config);

/// Runs every stage after manifest.watermark, writing "<dir>/<stage>.jsonl"
/// and "<dir>/state.json" after each one, then "<dir>/manifest.jsonl".
/// Records are processed in parallel and persisted sorted by id. A client
/// failure drops only the affected record, with reason client_error.
Manifest run_pipeline(Manifest manifest, const CurationConfig& config, const ClientSet& clients,
                      const FrameSource& frames, const std::filesystem::path& dir,
                      std::string_view stop_after = kStageAnnotate);

/// Continues from the watermark recorded in "<dir>/state.json", or from an
/// earlier stage when `from` names one. Throws on a config-hash mismatch.
Manifest resume_pipeline(const CurationConfig& config, const ClientSet& clients,
                         const FrameSource& frames, const std::filesystem::path& dir,
                         std::string_view from = {});

struct StageCounts {
  std::size_t records = 0;
  std::size_t kept = 0;
  std::size_t low_res = 0;
  std::size_t static_clips = 0;
  std::size_t hyperactive = 0;
  std::size_t duplicate = 0;
  std::size_t client_error = 0;
  std::size_t needs_review = 0;
};
StageCounts count_records(const std::vector<ClipRecord>& records);

}  // namespace omnifuse::curation
