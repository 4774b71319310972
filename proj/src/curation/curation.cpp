// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/curation/curation.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace omnifuse::curation {

using nlohmann::json;
using nlohmann::ordered_json;
using visual::VideoClip;

VideoClip to_gray(const VideoClip& clip, std::size_t factor) {
  clip.validate();
  if (factor == 0) throw CurationError("to_gray: factor must be positive");
  const std::size_t h = std::max<std::size_t>(1, clip.height / factor);
  const std::size_t w = std::max<std::size_t>(1, clip.width / factor);
  VideoClip out = VideoClip::blank(clip.frames, h, w, 1);
  out.fps = clip.fps;
  out.source_width = clip.source_width;
  out.source_height = clip.source_height;
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t yy = y * factor; yy < std::min(clip.height, (y + 1) * factor); ++yy) {
          for (std::size_t xx = x * factor; xx < std::min(clip.width, (x + 1) * factor); ++xx) {
            if (clip.channels >= 3) {
              s += 0.299 * clip.at(t, yy, xx, 0) + 0.587 * clip.at(t, yy, xx, 1) +
                   0.114 * clip.at(t, yy, xx, 2);
            } else {
              s += clip.at(t, yy, xx, 0);
            }
            ++n;
          }
        }
        out.at(t, y, x, 0) = s / static_cast<double>(n);
      }
    }
  }
  return out;
}

double frame_difference(const VideoClip& gray, std::size_t a, std::size_t b) {
  if (gray.channels != 1) throw CurationError("frame_difference: expects one channel");
  if (a >= gray.frames || b >= gray.frames) throw CurationError("frame index out of range");
  const std::size_t plane = gray.height * gray.width;
  double s = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    s += std::abs(gray.pixels[a * plane + i] - gray.pixels[b * plane + i]);
  }
  return s / static_cast<double>(plane);
}

std::vector<std::size_t> detect_scenes(const VideoClip& gray, double tau, std::size_t min_len) {
  if (!(tau > 0.0 && tau < 1.0)) throw CurationError("detect_scenes: tau must lie in (0, 1)");
  if (gray.frames < 2) return {};
  std::vector<std::size_t> cuts;
  for (std::size_t i = 1; i < gray.frames; ++i) {
    if (frame_difference(gray, i - 1, i) > tau) cuts.push_back(i);
  }
  // A raw segment that is too short loses its starting cut.
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    const std::size_t end = k + 1 < cuts.size() ? cuts[k + 1] : gray.frames;
    if (end - cuts[k] >= min_len) kept.push_back(cuts[k]);
  }
  if (!kept.empty() && kept.front() < min_len) kept.erase(kept.begin());
  return kept;
}

std::size_t count_keyframes(const VideoClip& gray, double tau) {
  if (gray.frames == 0) throw CurationError("count_keyframes: empty clip");
  const std::size_t n = gray.frames;
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) d[i] = frame_difference(gray, i - 1, i);
  std::size_t count = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (d[i] <= tau) continue;
    const bool rises = i == 1 || d[i] > d[i - 1];
    const bool holds = i + 1 == n || d[i] >= d[i + 1];
    count += rises && holds;
  }
  return count;
}

std::string_view status_name(ClipStatus status) {
  switch (status) {
    case ClipStatus::kRaw: return "raw";
    case ClipStatus::kSplit: return "split";
    case ClipStatus::kKept: return "kept";
    case ClipStatus::kDropped: return "dropped";
  }
  return "?";
}

ClipStatus parse_status(std::string_view name) {
  for (auto s : {ClipStatus::kRaw, ClipStatus::kSplit, ClipStatus::kKept, ClipStatus::kDropped}) {
    if (status_name(s) == name) return s;
  }
  throw CurationError("unknown status '" + std::string(name) + "'");
}

std::string_view reason_name(DropReason reason) {
  switch (reason) {
    case DropReason::kLowRes: return "low_res";
    case DropReason::kStatic: return "static";
    case DropReason::kHyperactive: return "hyperactive";
    case DropReason::kDuplicate: return "duplicate";
    case DropReason::kClientError: return "client_error";
  }
  return "?";
}

DropReason parse_reason(std::string_view name) {
  for (auto r : {DropReason::kLowRes, DropReason::kStatic, DropReason::kHyperactive,
                 DropReason::kDuplicate, DropReason::kClientError}) {
    if (reason_name(r) == name) return r;
  }
  throw CurationError("unknown drop reason '" + std::string(name) + "'");
}

void ClipRecord::validate() const {
  if (id.empty()) throw CurationError("record without id");
  if ((status == ClipStatus::kDropped) != reason.has_value()) {
    throw CurationError("record " + id + ": a drop reason must accompany exactly the dropped status");
  }
  for (const auto& b : boxes) {
    if (b.x < 0 || b.y < 0 || b.w < 0 || b.h < 0 ||
        b.x + b.w > static_cast<std::int64_t>(width) ||
        b.y + b.h > static_cast<std::int64_t>(height)) {
      throw CurationError("record " + id + ": box outside the frame");
    }
  }
}

std::optional<DropReason> filter_clip(const ClipRecord& record, std::size_t keyframes,
                                      const FilterRules& rules) {
  if (record.height < rules.min_height) return DropReason::kLowRes;
  if (keyframes < rules.min_keyframes) return DropReason::kStatic;
  if (!(record.fps > 0.0) || record.frame_count == 0) {
    throw CurationError("record " + record.id + ": fps and frame_count must be positive");
  }
  const double seconds = static_cast<double>(record.frame_count) / record.fps;
  if (static_cast<double>(keyframes) / seconds > rules.max_keyframe_rate) {
    return DropReason::kHyperactive;
  }
  return std::nullopt;
}

std::vector<std::size_t> dedup_vectors(const std::vector<std::vector<double>>& embeddings,
                                       double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw CurationError("dedup: tau must lie in (0, 1]");
  constexpr double kTie = 1e-12;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    bool duplicate = false;
    for (std::size_t k : kept) {
      if (embeddings[k].size() != embeddings[i].size()) {
        throw CurationError("dedup: embedding sizes differ");
      }
      double dot = 0.0;
      for (std::size_t j = 0; j < embeddings[i].size(); ++j) dot += embeddings[i][j] * embeddings[k][j];
      if (dot >= tau - kTie) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(i);
  }
  return kept;
}

std::vector<std::string> dedup(const std::vector<ClipRecord>& records,
                               const EmbedderClient& embedder, double tau) {
  std::vector<const ClipRecord*> order;
  for (const auto& r : records) {
    if (!r.brief_caption) throw CurationError("dedup: record " + r.id + " has no brief caption");
    order.push_back(&r);
  }
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::vector<std::vector<double>> vectors;
  for (const auto* r : order) vectors.push_back(embedder.embed(*r->brief_caption));
  std::vector<std::string> ids;
  for (std::size_t i : dedup_vectors(vectors, tau)) ids.push_back(order[i]->id);
  return ids;
}

std::string consensus_caption(const std::vector<std::string>& detailed,
                              const SummarizerClient& summarizer) {
  if (detailed.size() < 2) throw CurationError("consensus needs at least two captions");
  return summarizer.summarize(detailed);
}

namespace {

template <class T>
ordered_json optional_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::string record_to_json(const ClipRecord& r) {
  ordered_json boxes = ordered_json::array();
  for (const auto& b : r.boxes) {
    boxes.push_back({{"frame_idx", b.frame},
                     {"kind", box_kind_name(b.kind)},
                     {"x", b.x},
                     {"y", b.y},
                     {"w", b.w},
                     {"h", b.h}});
  }
  ordered_json j{{"id", r.id},
                 {"source", r.source},
                 {"resolution", {r.width, r.height}},
                 {"frame_count", r.frame_count},
                 {"fps", r.fps},
                 {"brief_caption", optional_json(r.brief_caption)},
                 {"detailed_captions", r.detailed_captions},
                 {"final_caption", optional_json(r.final_caption)},
                 {"boxes", boxes},
                 {"status", status_name(r.status)},
                 {"reason", r.reason ? ordered_json(reason_name(*r.reason)) : ordered_json(nullptr)},
                 {"keyframes", optional_json(r.keyframes)},
                 {"needs_review", r.needs_review}};
  return j.dump();
}

ClipRecord record_from_json(std::string_view line) {
  ClipRecord r;
  try {
    const json j = json::parse(line);
    r.id = j.at("id").get<std::string>();
    r.source = j.at("source").get<std::string>();
    r.width = j.at("resolution").at(0).get<std::size_t>();
    r.height = j.at("resolution").at(1).get<std::size_t>();
    r.frame_count = j.at("frame_count").get<std::size_t>();
    r.fps = j.at("fps").get<double>();
    if (j.contains("brief_caption") && !j["brief_caption"].is_null()) {
      r.brief_caption = j["brief_caption"].get<std::string>();
    }
    if (j.contains("detailed_captions")) {
      r.detailed_captions = j["detailed_captions"].get<std::vector<std::string>>();
    }
    if (j.contains("final_caption") && !j["final_caption"].is_null()) {
      r.final_caption = j["final_caption"].get<std::string>();
    }
    if (j.contains("boxes")) {
      for (const auto& b : j["boxes"]) {
        r.boxes.push_back({b.at("frame_idx").get<std::size_t>(),
                           parse_box_kind(b.at("kind").get<std::string>()),
                           b.at("x").get<std::int64_t>(), b.at("y").get<std::int64_t>(),
                           b.at("w").get<std::int64_t>(), b.at("h").get<std::int64_t>()});
      }
    }
    r.status = parse_status(j.value("status", std::string("raw")));
    if (j.contains("reason") && !j["reason"].is_null()) {
      r.reason = parse_reason(j["reason"].get<std::string>());
    }
    if (j.contains("keyframes") && !j["keyframes"].is_null()) {
      r.keyframes = j["keyframes"].get<std::size_t>();
    }
    r.needs_review = j.value("needs_review", false);
  } catch (const json::exception& e) {
    throw CurationError(std::string("malformed manifest line: ") + e.what());
  } catch (const ClientError& e) {
    throw CurationError(std::string("malformed manifest line: ") + e.what());
  }
  r.validate();
  return r;
}

const std::vector<std::string_view>& stage_order() {
  static const std::vector<std::string_view> order{kStageRaw, kStageSplit, kStageScreen,
                                                   kStageDedup, kStageAnnotate};
  return order;
}

namespace {

std::size_t stage_index(std::string_view name) {
  const auto& order = stage_order();
  const auto it = std::find(order.begin(), order.end(), name);
  if (it == order.end()) throw CurationError("unknown pipeline stage '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - order.begin());
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CurationError("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw CurationError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_jsonl(const std::filesystem::path& path, const std::vector<ClipRecord>& records) {
  std::string text;
  for (const auto& r : records) text += record_to_json(r) + "\n";
  write_atomic(path, text);
}

std::vector<ClipRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CurationError("cannot read manifest " + path.string());
  std::vector<ClipRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const CurationError& e) {
      throw CurationError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void CurationConfig::validate() const {
  if (!(tau_scene > 0.0 && tau_scene < 1.0)) throw CurationError("tau_scene must lie in (0, 1)");
  if (!(tau_key >= 0.0)) throw CurationError("tau_key must be non-negative");
  if (!(tau_sim > 0.0 && tau_sim <= 1.0)) throw CurationError("tau_sim must lie in (0, 1]");
  if (!(consensus_jaccard > 0.0 && consensus_jaccard <= 1.0)) {
    throw CurationError("consensus_jaccard must lie in (0, 1]");
  }
  if (!(rules.max_keyframe_rate > 0.0)) throw CurationError("max_keyframe_rate must be positive");
  if (detailed_models.size() < 2) throw CurationError("consensus needs at least two caption models");
  if (clients != "mock" && clients != "http") {
    throw CurationError("clients must be 'mock' or 'http', got '" + clients + "'");
  }
  if (embed_dim == 0) throw CurationError("embed_dim must be positive");
}

std::string canonical_config(const CurationConfig& c) {
  json j{{"tau_scene", c.tau_scene},
         {"min_scene_len", c.min_scene_len},
         {"tau_key", c.tau_key},
         {"min_height", c.rules.min_height},
         {"min_keyframes", c.rules.min_keyframes},
         {"max_keyframe_rate", c.rules.max_keyframe_rate},
         {"tau_sim", c.tau_sim},
         {"consensus_jaccard", c.consensus_jaccard},
         {"detailed_models", c.detailed_models},
         {"embed_dim", c.embed_dim},
         {"seed", c.seed},
         {"clients", c.clients}};
  if (c.clients == "http") j["http_base_url"] = c.http.base_url;
  return j.dump();  // json objects keep keys sorted
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw CurationError("sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string config_hash(const CurationConfig& config) {
  return sha256_hex(canonical_config(config));
}

VideoClip load_frames(const FrameSource& source, std::string_view reference) {
  const auto hash = reference.find('#');
  VideoClip clip = source.load(reference.substr(0, hash));
  if (hash == std::string_view::npos) return clip;
  const auto range = reference.substr(hash + 1);
  const auto colon = range.find(':');
  std::size_t start = 0, end = 0;
  const auto bad = [&] { return CurationError("bad frame range in '" + std::string(reference) + "'"); };
  if (colon == std::string_view::npos) throw bad();
  if (std::from_chars(range.data(), range.data() + colon, start).ec != std::errc() ||
      std::from_chars(range.data() + colon + 1, range.data() + range.size(), end).ec !=
          std::errc()) {
    throw bad();
  }
  if (start >= end || end > clip.frames) throw bad();
  const std::size_t plane = clip.height * clip.width * clip.channels;
  VideoClip out = clip;
  out.frames = end - start;
  out.pixels.assign(clip.pixels.begin() + static_cast<std::ptrdiff_t>(start * plane),
                    clip.pixels.begin() + static_cast<std::ptrdiff_t>(end * plane));
  return out;
}

ClientSet make_clients(const CurationConfig& config) {
  if (config.clients == "http") return make_http_clients(config.http);
  return make_mock_clients(config.seed, config.embed_dim, config.consensus_jaccard);
}

namespace {

// Runs fn(i) for every i on up to `workers` threads. The first exception
// other than ClientError (which fn handles itself) is rethrown.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void drop(ClipRecord& r, DropReason reason) {
  r.status = ClipStatus::kDropped;
  r.reason = reason;
}

std::string with_range(const std::string& source, std::size_t start, std::size_t end) {
  std::size_t offset = 0;
  std::string base = source;
  if (const auto hash = source.find('#'); hash != std::string::npos) {
    base = source.substr(0, hash);
    std::from_chars(source.data() + hash + 1, source.data() + source.size(), offset);
  }
  return base + "#" + std::to_string(offset + start) + ":" + std::to_string(offset + end);
}

std::string child_id(const std::string& parent, std::size_t k) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "_%02zu", k);
  return parent + buf;
}

struct StageContext {
  const CurationConfig& config;
  const ClientSet& clients;
  const FrameSource& frames;
};

std::vector<ClipRecord> stage_split(const std::vector<ClipRecord>& in, const StageContext& ctx) {
  std::vector<std::vector<ClipRecord>> parts(in.size());
  parallel_for(in.size(), ctx.config.workers, [&](std::size_t i) {
    const ClipRecord& r = in[i];
    if (r.status != ClipStatus::kRaw) {
      parts[i] = {r};
      return;
    }
    const VideoClip gray = load_frames(ctx.frames, r.source);
    if (gray.frames != r.frame_count) {
      throw CurationError("record " + r.id + ": frame_count " + std::to_string(r.frame_count) +
                          " but the source holds " + std::to_string(gray.frames));
    }
    auto cuts = detect_scenes(gray, ctx.config.tau_scene, ctx.config.min_scene_len);
    cuts.insert(cuts.begin(), 0);
    cuts.push_back(gray.frames);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      ClipRecord c = r;
      c.id = child_id(r.id, k);
      c.source = with_range(r.source, cuts[k], cuts[k + 1]);
      c.frame_count = cuts[k + 1] - cuts[k];
      c.status = ClipStatus::kSplit;
      parts[i].push_back(std::move(c));
    }
  });
  std::vector<ClipRecord> out;
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
  return out;
}

std::vector<ClipRecord> stage_screen(std::vector<ClipRecord> recs, const StageContext& ctx) {
  parallel_for(recs.size(), ctx.config.workers, [&](std::size_t i) {
    ClipRecord& r = recs[i];
    if (r.status != ClipStatus::kSplit) return;
    const VideoClip gray = load_frames(ctx.frames, r.source);
    const std::size_t keys = count_keyframes(gray, ctx.config.tau_key);
    r.keyframes = keys;
    if (const auto reason = filter_clip(r, keys, ctx.config.rules)) {
      drop(r, *reason);
    } else {
      r.status = ClipStatus::kKept;
    }
  });
  return recs;
}

std::vector<ClipRecord> stage_dedup(std::vector<ClipRecord> recs, const StageContext& ctx) {
  std::vector<std::optional<std::vector<double>>> vectors(recs.size());
  parallel_for(recs.size(), ctx.config.workers, [&](std::size_t i) {
    ClipRecord& r = recs[i];
    if (r.status != ClipStatus::kKept) return;
    try {
      const VideoClip gray = load_frames(ctx.frames, r.source);
      r.brief_caption = ctx.clients.captioner->caption({r.id, &gray, CaptionStyle::kBrief, ""});
      vectors[i] = ctx.clients.embedder->embed(*r.brief_caption);
    } catch (const ClientError&) {
      drop(r, DropReason::kClientError);
    }
  });
  // Records arrive sorted by id, so index order is id order.
  std::vector<std::size_t> live;
  std::vector<std::vector<double>> embedded;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].status == ClipStatus::kKept && vectors[i]) {
      live.push_back(i);
      embedded.push_back(*vectors[i]);
    }
  }
  std::vector<bool> keep(live.size(), false);
  for (std::size_t k : dedup_vectors(embedded, ctx.config.tau_sim)) keep[k] = true;
  for (std::size_t k = 0; k < live.size(); ++k) {
    if (!keep[k]) drop(recs[live[k]], DropReason::kDuplicate);
  }
  return recs;
}

std::vector<ClipRecord> stage_annotate(std::vector<ClipRecord> recs, const StageContext& ctx) {
  parallel_for(recs.size(), ctx.config.workers, [&](std::size_t i) {
    ClipRecord& r = recs[i];
    if (r.status != ClipStatus::kKept) return;
    try {
      const VideoClip gray = load_frames(ctx.frames, r.source);
      std::vector<std::string> detailed;
      for (const auto& model : ctx.config.detailed_models) {
        detailed.push_back(
            ctx.clients.captioner->caption({r.id, &gray, CaptionStyle::kDetailed, model}));
      }
      std::string final_caption = consensus_caption(detailed, *ctx.clients.summarizer);
      auto boxes = ctx.clients.detector->detect(r.id, gray, r.width, r.height);
      r.detailed_captions = std::move(detailed);
      r.needs_review = final_caption.empty();
      r.final_caption = std::move(final_caption);
      r.boxes = std::move(boxes);
    } catch (const ClientError&) {
      drop(r, DropReason::kClientError);
    }
  });
  return recs;
}

void write_state(const std::filesystem::path& dir, const Manifest& m) {
  json stages = json::array();
  for (std::size_t i = 0; i <= stage_index(m.watermark); ++i) stages.push_back(stage_order()[i]);
  const json state{{"config_hash", m.config_hash}, {"watermark", m.watermark}, {"stages", stages}};
  write_atomic(dir / "state.json", state.dump(2) + "\n");
}

}  // namespace

Manifest run_pipeline(Manifest manifest, const CurationConfig& config, const ClientSet& clients,
                      const FrameSource& frames, const std::filesystem::path& dir,
                      std::string_view stop_after) {
  config.validate();
  if (!clients.captioner || !clients.embedder || !clients.summarizer || !clients.detector) {
    throw CurationError("run_pipeline: every client must be set");
  }
  const std::string hash = config_hash(config);
  if (!manifest.config_hash.empty() && manifest.config_hash != hash) {
    throw CurationError("config hash mismatch: manifest was built with " + manifest.config_hash +
                        ", current config hashes to " + hash);
  }
  manifest.config_hash = hash;
  std::filesystem::create_directories(dir);
  const std::size_t start = stage_index(manifest.watermark);
  const std::size_t stop = stage_index(stop_after);
  auto persist = [&] {
    std::sort(manifest.records.begin(), manifest.records.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& r : manifest.records) r.validate();
    write_jsonl(dir / (manifest.watermark + ".jsonl"), manifest.records);
    write_state(dir, manifest);
  };
  if (start == 0) persist();
  const StageContext ctx{config, clients, frames};
  for (std::size_t s = start + 1; s <= stop; ++s) {
    const auto name = stage_order()[s];
    if (name == kStageSplit) manifest.records = stage_split(manifest.records, ctx);
    if (name == kStageScreen) manifest.records = stage_screen(std::move(manifest.records), ctx);
    if (name == kStageDedup) manifest.records = stage_dedup(std::move(manifest.records), ctx);
    if (name == kStageAnnotate) manifest.records = stage_annotate(std::move(manifest.records), ctx);
    manifest.watermark = std::string(name);
    persist();
  }
  if (manifest.watermark == kStageAnnotate) write_jsonl(dir / "manifest.jsonl", manifest.records);
  return manifest;
}

Manifest resume_pipeline(const CurationConfig& config, const ClientSet& clients,
                         const FrameSource& frames, const std::filesystem::path& dir,
                         std::string_view from) {
  std::ifstream in(dir / "state.json");
  if (!in) throw CurationError("no pipeline state in " + dir.string());
  json state;
  try {
    state = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CurationError("unreadable state.json: " + std::string(e.what()));
  }
  Manifest m;
  m.config_hash = state.value("config_hash", std::string());
  const std::string done = state.value("watermark", std::string(kStageRaw));
  if (m.config_hash != config_hash(config)) {
    throw CurationError("config hash mismatch: state in " + dir.string() + " was built with " +
                        m.config_hash + ", current config hashes to " + config_hash(config));
  }
  m.watermark = from.empty() ? done : std::string(from);
  if (stage_index(m.watermark) > stage_index(done)) {
    throw CurationError("cannot resume from '" + m.watermark + "': last finished stage is '" +
                        done + "'");
  }
  m.records = read_jsonl(dir / (m.watermark + ".jsonl"));
  return run_pipeline(std::move(m), config, clients, frames, dir);
}

StageCounts count_records(const std::vector<ClipRecord>& records) {
  StageCounts c;
  c.records = records.size();
  for (const auto& r : records) {
    c.kept += r.status == ClipStatus::kKept;
    c.needs_review += r.needs_review;
    if (!r.reason) continue;
    switch (*r.reason) {
      case DropReason::kLowRes: ++c.low_res; break;
      case DropReason::kStatic: ++c.static_clips; break;
      case DropReason::kHyperactive: ++c.hyperactive; break;
      case DropReason::kDuplicate: ++c.duplicate; break;
      case DropReason::kClientError: ++c.client_error; break;
    }
  }
  return c;
}

}  // namespace omnifuse::curation
