// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>
#include <json.hpp>

#include <cmath>

#include "omnifuse/curation/clients.hpp"

namespace omnifuse::curation {

using nlohmann::json;
using visual::VideoClip;

namespace {

json frames_json(const VideoClip& g) {
  json frames = json::array();
  const std::size_t plane = g.height * g.width * g.channels;
  for (std::size_t t = 0; t < g.frames; ++t) {
    frames.push_back(std::vector<double>(g.pixels.begin() + static_cast<std::ptrdiff_t>(t * plane),
                                         g.pixels.begin() + static_cast<std::ptrdiff_t>((t + 1) * plane)));
  }
  return frames;
}

class HttpTransport {
 public:
  explicit HttpTransport(HttpClientConfig config) : config_(std::move(config)) {}

  json post(const std::string& path, const json& body) const {
    const std::string payload = body.dump();
    return with_retries(config_.options, "POST " + path, [&] {
      // One client per call keeps concurrent use from sharing a socket.
      httplib::Client client(config_.base_url);
      const auto seconds = config_.options.timeout_seconds;
      const auto sec = static_cast<time_t>(seconds);
      const auto usec = static_cast<time_t>((seconds - static_cast<double>(sec)) * 1e6);
      client.set_connection_timeout(sec, usec);
      client.set_read_timeout(sec, usec);
      client.set_write_timeout(sec, usec);
      auto res = client.Post(path, payload, "application/json");
      if (!res) {
        throw TimeoutError(path + ": " + httplib::to_string(res.error()));
      }
      if (res->status >= 500) {
        throw TimeoutError(path + ": server error " + std::to_string(res->status));
      }
      if (res->status != 200) {
        throw ClientError(path + ": status " + std::to_string(res->status));
      }
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw ClientError(path + ": malformed reply: " + e.what());
      }
    });
  }

 private:
  HttpClientConfig config_;
};

template <class T>
T member(const json& reply, const char* key, const std::string& path) {
  try {
    return reply.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ClientError(path + ": reply field '" + key + "': " + e.what());
  }
}

class HttpCaptioner : public CaptionerClient {
 public:
  explicit HttpCaptioner(HttpClientConfig c) : http_(std::move(c)) {}
  std::string caption(const CaptionRequest& r) const override {
    if (r.frames == nullptr) throw ClientError("caption request without frames");
    const json body{{"clip_id", r.clip_id},
                    {"style", r.style == CaptionStyle::kBrief ? "brief" : "detailed"},
                    {"model", r.model},
                    {"width", r.frames->width},
                    {"height", r.frames->height},
                    {"frames", frames_json(*r.frames)}};
    return member<std::string>(http_.post("/v1/caption", body), "caption", "/v1/caption");
  }

 private:
  HttpTransport http_;
};

class HttpEmbedder : public EmbedderClient {
 public:
  explicit HttpEmbedder(HttpClientConfig c) : http_(std::move(c)) {}
  std::vector<double> embed(std::string_view text) const override {
    auto v = member<std::vector<double>>(http_.post("/v1/embed", json{{"text", text}}),
                                         "embedding", "/v1/embed");
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ClientError("/v1/embed: zero embedding");
    for (double& x : v) x /= norm;
    return v;
  }

 private:
  HttpTransport http_;
};

class HttpSummarizer : public SummarizerClient {
 public:
  explicit HttpSummarizer(HttpClientConfig c) : http_(std::move(c)) {}
  std::string summarize(const std::vector<std::string>& captions) const override {
    return member<std::string>(http_.post("/v1/summarize", json{{"captions", captions}}),
                               "caption", "/v1/summarize");
  }

 private:
  HttpTransport http_;
};

class HttpDetector : public DetectorClient {
 public:
  explicit HttpDetector(HttpClientConfig c) : http_(std::move(c)) {}
  std::vector<Box> detect(const std::string& clip_id, const VideoClip& frames, std::size_t width,
                          std::size_t height) const override {
    const json body{{"clip_id", clip_id},
                    {"width", width},
                    {"height", height},
                    {"frames", frames_json(frames)}};
    const json reply = http_.post("/v1/detect", body);
    std::vector<Box> out;
    try {
      for (const auto& b : reply.at("boxes")) {
        out.push_back({b.at("frame").get<std::size_t>(),
                       parse_box_kind(b.at("kind").get<std::string>()), b.at("x").get<std::int64_t>(),
                       b.at("y").get<std::int64_t>(), b.at("w").get<std::int64_t>(),
                       b.at("h").get<std::int64_t>()});
      }
    } catch (const json::exception& e) {
      throw ClientError(std::string("/v1/detect: bad box list: ") + e.what());
    }
    return out;
  }

 private:
  HttpTransport http_;
};

}  // namespace

ClientSet make_http_clients(const HttpClientConfig& config) {
  if (config.base_url.empty()) throw ClientError("http clients need a base_url");
  return {std::make_shared<HttpCaptioner>(config), std::make_shared<HttpEmbedder>(config),
          std::make_shared<HttpSummarizer>(config), std::make_shared<HttpDetector>(config)};
}

}  // namespace omnifuse::curation
