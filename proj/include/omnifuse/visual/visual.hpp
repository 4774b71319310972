// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "omnifuse/numerics/layers.hpp"
#include "omnifuse/numerics/tensor.hpp"

namespace omnifuse::visual {

class VisualError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VisualConfig {
  std::size_t input_size = 64;  // square frame side after preprocessing
  std::size_t patch = 8;
  std::size_t channels = 3;
  std::size_t target_grid = 4;  // aligned (H_v, W_v) shared by all branches
  std::size_t d_enc = 32;
  std::size_t d_model = 32;

  std::size_t raw_grid() const { return input_size / patch; }
};

/// T x H x W x C frames with values in [0, 1].
struct VideoClip {
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<double> pixels;
  double fps = 1.0;
  // Declared source resolution (W, H); may differ from the pixel buffer.
  std::size_t source_width = 0;
  std::size_t source_height = 0;

  static VideoClip blank(std::size_t t, std::size_t h, std::size_t w, std::size_t c = 3);
  void validate() const;
  std::size_t index(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
    return ((t * height + y) * width + x) * channels + c;
  }
  double& at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) {
    return pixels[index(t, y, x, c)];
  }
  double at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[index(t, y, x, c)];
  }
};

enum class BranchId { kFace = 0, kBody = 1, kInteraction = 2 };
inline constexpr std::array<BranchId, 3> kAllBranches{BranchId::kFace, BranchId::kBody,
                                                      BranchId::kInteraction};

std::string_view branch_name(BranchId id);
BranchId parse_branch(std::string_view name);

/// Bilinear resize of every frame to size x size; channel count preserved.
VideoClip resize_clip(const VideoClip& clip, std::size_t size);

/// Frozen stand-in for a pretrained image encoder: per-frame patchify, linear
/// patch embedding, and a learned-looking positional offset per grid cell.
class VisualEncoderStub {
 public:
  VisualEncoderStub() = default;
  VisualEncoderStub(const VisualConfig& config, Rng& rng);

  /// Clip must already be input_size square; returns [T, g, g, d_enc].
  Tensor encode_frames(const VideoClip& clip) const;
  void collect(std::vector<NamedTensor>& out) const;

 private:
  VisualConfig config_;
  Linear patch_embed_;
  Tensor positions_;  // [g*g, d_enc]
};

/// Detail-sensitive projector: average-pool the raw grid onto the aligned
/// grid, then a per-token linear -> GeLU -> linear into d_model.
class FaceProjector {
 public:
  FaceProjector() = default;
  FaceProjector(const VisualConfig& config, Rng& rng);

  Tensor project(const Tensor& raw) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
  Mlp2& mlp() { return mlp_; }

 private:
  std::size_t target_grid_ = 0;
  Mlp2 mlp_;
};

/// Spatial-temporal projector: a strided 3-D convolution over the raw grid,
/// kernel 3 in time (stride 1, edge-padded so T is preserved) and s + 2 in
/// space (stride s = raw / target, one cell of zero padding), folded into the
/// first linear layer, then GeLU and a second linear layer.
class StcProjector {
 public:
  StcProjector() = default;
  StcProjector(const VisualConfig& config, Rng& rng);

  Tensor project(const Tensor& raw) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
  Mlp2& mlp() { return mlp_; }

 private:
  std::size_t target_grid_ = 0;
  std::size_t stride_ = 0;
  std::size_t kernel_ = 0;
  Mlp2 mlp_;
};

/// Aligned branch features F1 (face), F2 (body), F3 (interaction).
struct BranchFeatures {
  Tensor face;
  Tensor body;
  Tensor interaction;

  const Tensor& operator[](BranchId id) const;
};

/// Shared frozen encoder plus the three branch projectors.
class VisualBranches {
 public:
  VisualBranches() = default;
  VisualBranches(const VisualConfig& config, std::uint64_t seed);

  VideoClip preprocess(const VideoClip& clip) const;
  Tensor encode(const VideoClip& clip) const;
  BranchFeatures project(const Tensor& raw) const;
  BranchFeatures forward(const VideoClip& clip) const { return project(encode(clip)); }
  Tensor project_one(BranchId id, const Tensor& raw) const;

  const VisualConfig& config() const { return config_; }
  const VisualEncoderStub& encoder() const { return encoder_; }
  FaceProjector& face() { return face_; }
  StcProjector& body() { return body_; }
  StcProjector& interaction() { return interaction_; }
  const FaceProjector& face() const { return face_; }
  const StcProjector& body() const { return body_; }
  const StcProjector& interaction() const { return interaction_; }

 private:
  VisualConfig config_;
  VisualEncoderStub encoder_;
  FaceProjector face_;
  StcProjector body_;
  StcProjector interaction_;
};

/// Reads a directory of .ppm / .png frames (sorted by file name).
VideoClip read_frames_dir(const std::filesystem::path& dir, double fps = 1.0);
/// Raw tensor clip file: text header "omnifuse-clip T H W C fps" followed by a
/// newline and T*H*W*C little-endian float64 values.
VideoClip read_raw_clip(const std::filesystem::path& path);
void write_raw_clip(const std::filesystem::path& path, const VideoClip& clip);
void write_ppm(const std::filesystem::path& path, const VideoClip& clip, std::size_t frame);
/// Dispatches on path type: directory of frames, or raw clip file.
VideoClip load_clip(const std::filesystem::path& path, double fps = 1.0);

}  // namespace omnifuse::visual
