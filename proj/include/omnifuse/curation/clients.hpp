// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "omnifuse/visual/visual.hpp"

namespace omnifuse::curation {

class ClientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transient failure; retried.
class TimeoutError : public ClientError {
 public:
  using ClientError::ClientError;
};

struct ClientOptions {
  double timeout_seconds = 30.0;
  std::size_t retries = 2;
  double backoff_seconds = 0.5;  // doubled after every failed attempt
};

/// Runs `fn` up to 1 + retries times. Only TimeoutError is retried; the
/// last one is rethrown as a ClientError naming the attempt count.
template <class F>
auto with_retries(const ClientOptions& options, std::string_view what, F&& fn,
                  const std::function<void(double)>& sleep = {}) {
  double wait = options.backoff_seconds;
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const TimeoutError& e) {
      if (attempt >= options.retries) {
        throw ClientError(std::string(what) + " failed after " + std::to_string(attempt + 1) +
                          " attempts: " + e.what());
      }
    }
    if (wait > 0.0) {
      if (sleep) {
        sleep(wait);
      } else {
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      }
    }
    wait *= 2.0;
  }
}

enum class CaptionStyle { kBrief, kDetailed };
enum class BoxKind { kPerson, kFace };

std::string_view box_kind_name(BoxKind kind);
BoxKind parse_box_kind(std::string_view name);

/// Pixel box in the clip's declared resolution.
struct Box {
  std::size_t frame = 0;
  BoxKind kind = BoxKind::kPerson;
  std::int64_t x = 0, y = 0, w = 0, h = 0;
  bool operator==(const Box&) const = default;
};

struct CaptionRequest {
  std::string clip_id;
  const visual::VideoClip* frames = nullptr;  // grayscale thumbnails
  CaptionStyle style = CaptionStyle::kBrief;
  std::string model;  // which captioner when several describe one clip
};

class CaptionerClient {
 public:
  virtual ~CaptionerClient() = default;
  virtual std::string caption(const CaptionRequest& request) const = 0;
};

class EmbedderClient {
 public:
  virtual ~EmbedderClient() = default;
  /// Unit-norm embedding.
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

class SummarizerClient {
 public:
  virtual ~SummarizerClient() = default;
  virtual std::string summarize(const std::vector<std::string>& captions) const = 0;
};

class DetectorClient {
 public:
  virtual ~DetectorClient() = default;
  /// Boxes are in the declared (width, height) frame of the clip.
  virtual std::vector<Box> detect(const std::string& clip_id, const visual::VideoClip& frames,
                                  std::size_t width, std::size_t height) const = 0;
};

struct ClientSet {
  std::shared_ptr<const CaptionerClient> captioner;
  std::shared_ptr<const EmbedderClient> embedder;
  std::shared_ptr<const SummarizerClient> summarizer;
  std::shared_ptr<const DetectorClient> detector;
};

// Deterministic mocks. Every output is a pure function of the input and the
// seed, so they are safe to call from several threads.

/// Coarse scene statistics a mock captioner and detector read off
/// grayscale thumbnails.
struct ClipFeatures {
  double background = 0.0;  // mean border intensity of the first frame
  bool has_subject = false;
  double subject_x = 0.5;   // centroid of the first frame, in [0, 1]
  double subject_area = 0.0;
  double drift = 0.0;       // centroid shift first to last frame, in widths
};
ClipFeatures clip_features(const visual::VideoClip& gray);

class MockCaptioner : public CaptionerClient {
 public:
  explicit MockCaptioner(std::uint64_t seed) : seed_(seed) {}
  std::string caption(const CaptionRequest& request) const override;

 private:
  std::uint64_t seed_;
};

/// Signed feature hashing of normalized words, L2-normalized.
class MockEmbedder : public EmbedderClient {
 public:
  explicit MockEmbedder(std::uint64_t seed, std::size_t dim = 64) : seed_(seed), dim_(dim) {}
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Keeps the sentences of the first caption that have a match (token-set
/// Jaccard >= threshold) in every other caption.
class MockSummarizer : public SummarizerClient {
 public:
  explicit MockSummarizer(double jaccard = 0.8) : jaccard_(jaccard) {}
  std::string summarize(const std::vector<std::string>& captions) const override;

 private:
  double jaccard_;
};

/// Person box = bounding box of the subject; face box = its upper centre.
class MockDetector : public DetectorClient {
 public:
  std::vector<Box> detect(const std::string& clip_id, const visual::VideoClip& frames,
                          std::size_t width, std::size_t height) const override;
};

ClientSet make_mock_clients(std::uint64_t seed, std::size_t embed_dim = 64,
                            double jaccard = 0.8);

// JSON over HTTP. Endpoints under base_url:
//   POST /v1/caption    {clip_id, style, model, width, height, frames} -> {caption}
//   POST /v1/embed      {text}                                         -> {embedding}
//   POST /v1/summarize  {captions}                                     -> {caption}
//   POST /v1/detect     {clip_id, width, height, frames}               -> {boxes}
// `frames` is a list of row-major grayscale thumbnails. Transport errors and
// 5xx replies are retried with exponential backoff; other failures are not.
struct HttpClientConfig {
  std::string base_url = "http://127.0.0.1:8080";
  ClientOptions options;
};

ClientSet make_http_clients(const HttpClientConfig& config);

/// Sentences split on '.', '!' and '?', trimmed, terminator kept.
std::vector<std::string> split_sentences(std::string_view text);
/// Jaccard similarity of the normalized word sets of two strings.
double token_jaccard(std::string_view a, std::string_view b);

}  // namespace omnifuse::curation
