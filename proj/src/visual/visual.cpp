// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/visual/visual.hpp"

#include <algorithm>
#include <cmath>

#include "omnifuse/numerics/ops.hpp"

namespace omnifuse::visual {

VideoClip VideoClip::blank(std::size_t t, std::size_t h, std::size_t w, std::size_t c) {
  VideoClip clip;
  clip.frames = t;
  clip.height = h;
  clip.width = w;
  clip.channels = c;
  clip.pixels.assign(t * h * w * c, 0.0);
  clip.source_width = w;
  clip.source_height = h;
  return clip;
}

void VideoClip::validate() const {
  if (frames == 0) throw VisualError("video clip has no frames");
  if (height == 0 || width == 0 || channels == 0) throw VisualError("video clip has empty frames");
  if (pixels.size() != frames * height * width * channels) {
    throw VisualError("video clip pixel buffer does not match its dimensions");
  }
  for (double v : pixels) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw VisualError("pixel value outside [0, 1]");
  }
}

std::string_view branch_name(BranchId id) {
  switch (id) {
    case BranchId::kFace: return "face";
    case BranchId::kBody: return "body";
    case BranchId::kInteraction: return "interaction";
  }
  return "unknown";
}

BranchId parse_branch(std::string_view name) {
  for (BranchId id : kAllBranches) {
    if (branch_name(id) == name) return id;
  }
  throw VisualError("unknown branch '" + std::string(name) + "' (face|body|interaction)");
}

VideoClip resize_clip(const VideoClip& clip, std::size_t size) {
  clip.validate();
  if (clip.height == size && clip.width == size) return clip;
  VideoClip out = VideoClip::blank(clip.frames, size, size, clip.channels);
  out.fps = clip.fps;
  out.source_width = clip.source_width;
  out.source_height = clip.source_height;
  const double sy = static_cast<double>(clip.height) / static_cast<double>(size);
  const double sx = static_cast<double>(clip.width) / static_cast<double>(size);
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t y = 0; y < size; ++y) {
      const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                   static_cast<double>(clip.height - 1));
      const auto y0 = static_cast<std::size_t>(fy);
      const std::size_t y1 = std::min(y0 + 1, clip.height - 1);
      const double wy = fy - static_cast<double>(y0);
      for (std::size_t x = 0; x < size; ++x) {
        const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                     static_cast<double>(clip.width - 1));
        const auto x0 = static_cast<std::size_t>(fx);
        const std::size_t x1 = std::min(x0 + 1, clip.width - 1);
        const double wx = fx - static_cast<double>(x0);
        for (std::size_t c = 0; c < clip.channels; ++c) {
          const double top = (1 - wx) * clip.at(t, y0, x0, c) + wx * clip.at(t, y0, x1, c);
          const double bot = (1 - wx) * clip.at(t, y1, x0, c) + wx * clip.at(t, y1, x1, c);
          out.at(t, y, x, c) = (1 - wy) * top + wy * bot;
        }
      }
    }
  }
  return out;
}

namespace {

// Eight unit-norm 2-D filters over a p x p patch: intensity, x and y ramps,
// horizontal and vertical period-4 stripes, checker, xy saddle, and x^2.
double bank_filter(std::size_t k, std::size_t py, std::size_t px, std::size_t p) {
  const double c = (static_cast<double>(p) - 1.0) / 2.0;
  const double x = static_cast<double>(px) - c;
  const double y = static_cast<double>(py) - c;
  const double h = (py / 2) % 2 == 0 ? 1.0 : -1.0;
  const double v = (px / 2) % 2 == 0 ? 1.0 : -1.0;
  switch (k) {
    case 0: return 1.0;
    case 1: return x;
    case 2: return y;
    case 3: return h;
    case 4: return v;
    case 5: return h * v;
    case 6: return x * y;
    default: return x * x - (static_cast<double>(p * p) - 1.0) / 12.0;
  }
}

constexpr std::size_t kBankSize = 8;
constexpr double kBankGain = 0.125;

}  // namespace

VisualEncoderStub::VisualEncoderStub(const VisualConfig& config, Rng& rng)
    : config_(config),
      patch_embed_(config.patch * config.patch * config.channels, config.d_enc, rng),
      positions_(normal_tensor({config.raw_grid() * config.raw_grid(), config.d_enc}, 0.5, rng,
                               false)) {
  if (config.input_size % config.patch != 0) {
    throw VisualError("input size must be a multiple of the patch size");
  }
  // Leading output widths get a fixed per-channel filter bank, the rest keep
  // their seeded random projection.
  const std::size_t p = config.patch, ch = config.channels, d = config.d_enc;
  auto w = patch_embed_.weight.mutable_data();
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t k = 0; k < kBankSize; ++k) {
      const std::size_t col = c * kBankSize + k;
      if (col >= d) break;
      double norm = 0.0;
      for (std::size_t py = 0; py < p; ++py) {
        for (std::size_t px = 0; px < p; ++px) norm += std::pow(bank_filter(k, py, px, p), 2);
      }
      norm = std::sqrt(norm);
      for (std::size_t row = 0; row < p * p * ch; ++row) {
        const std::size_t py = row / (p * ch), px = (row / ch) % p, rc = row % ch;
        w[row * d + col] = rc == c ? kBankGain * 8.0 * bank_filter(k, py, px, p) / norm : 0.0;
      }
    }
  }
  std::normal_distribution<double> dist(0.0, 0.1);
  for (double& b : patch_embed_.bias.mutable_data()) b = dist(rng);
  patch_embed_.weight.set_requires_grad(false);
  patch_embed_.bias.set_requires_grad(false);
}

Tensor VisualEncoderStub::encode_frames(const VideoClip& clip) const {
  if (clip.frames == 0) throw VisualError("encode_frames: empty clip");
  clip.validate();
  if (clip.height != config_.input_size || clip.width != config_.input_size ||
      clip.channels != config_.channels) {
    throw VisualError("encode_frames: clip must be preprocessed to " +
                      std::to_string(config_.input_size) + "x" +
                      std::to_string(config_.input_size) + "x" +
                      std::to_string(config_.channels));
  }
  const std::size_t p = config_.patch, g = config_.raw_grid(), c = config_.channels;
  const std::size_t patch_len = p * p * c;
  const std::size_t rows = clip.frames * g * g;
  std::vector<double> patches(rows * patch_len);
  std::vector<std::size_t> cell(rows);
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t gy = 0; gy < g; ++gy) {
      for (std::size_t gx = 0; gx < g; ++gx) {
        const std::size_t row = (t * g + gy) * g + gx;
        cell[row] = gy * g + gx;
        double* dst = patches.data() + row * patch_len;
        for (std::size_t py = 0; py < p; ++py) {
          for (std::size_t px = 0; px < p; ++px) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              *dst++ = clip.at(t, gy * p + py, gx * p + px, ch);
            }
          }
        }
      }
    }
  }
  Tensor x = Tensor::from({rows, patch_len}, std::move(patches));
  Tensor tokens = add(patch_embed_(x), embed_lookup(positions_, cell));
  return reshape(tokens, {clip.frames, g, g, config_.d_enc});
}

void VisualEncoderStub::collect(std::vector<NamedTensor>& out) const {
  patch_embed_.collect("vis_encoder.patch", out);
  out.push_back({"vis_encoder.positions", positions_});
}

namespace {

// Average-pools the spatial axes of [T, g, g, d] onto [T, target, target, d].
Tensor pool_to_grid(const Tensor& raw, std::size_t target) {
  if (raw.rank() != 4 || raw.dim(1) != raw.dim(2)) {
    throw VisualError("projector: expected a square [T, g, g, d] grid, got " +
                      shape_str(raw.shape()));
  }
  const std::size_t g = raw.dim(1);
  if (g < target) {
    throw VisualError("projector: grid " + std::to_string(g) + " smaller than target " +
                      std::to_string(target));
  }
  const std::size_t group = (g + target - 1) / target;
  if ((g + group - 1) / group != target) {
    throw VisualError("projector: grid " + std::to_string(g) + " cannot pool onto " +
                      std::to_string(target));
  }
  if (group == 1) return raw;
  return mean_pool_axis(mean_pool_axis(raw, 1, group), 2, group);
}

}  // namespace

FaceProjector::FaceProjector(const VisualConfig& config, Rng& rng)
    : target_grid_(config.target_grid), mlp_(config.d_enc, config.d_model, config.d_model, rng) {}

Tensor FaceProjector::project(const Tensor& raw) const {
  Tensor pooled = pool_to_grid(raw, target_grid_);
  const std::size_t t = pooled.dim(0), d = pooled.dim(3);
  const std::size_t cells = t * target_grid_ * target_grid_;
  Tensor out = mlp_(reshape(pooled, {cells, d}));
  return reshape(out, {t, target_grid_, target_grid_, out.dim(1)});
}

void FaceProjector::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  mlp_.collect(prefix, out);
}

StcProjector::StcProjector(const VisualConfig& config, Rng& rng)
    : target_grid_(config.target_grid),
      stride_(config.raw_grid() / config.target_grid),
      kernel_(stride_ + 2) {
  if (config.target_grid == 0 || config.raw_grid() % config.target_grid != 0) {
    throw VisualError("STC projector: raw grid must be a multiple of the target grid");
  }
  mlp_ = Mlp2(3 * kernel_ * kernel_ * config.d_enc, config.d_model, config.d_model, rng);
}

Tensor StcProjector::project(const Tensor& raw) const {
  if (raw.rank() != 4 || raw.dim(1) != raw.dim(2) || raw.dim(1) != target_grid_ * stride_) {
    throw VisualError("STC projector: expected a [T, " + std::to_string(target_grid_ * stride_) +
                      ", " + std::to_string(target_grid_ * stride_) + ", d] grid, got " +
                      shape_str(raw.shape()));
  }
  const std::size_t t = raw.dim(0), g = raw.dim(1), d = raw.dim(3);
  const std::size_t tg = target_grid_;
  // Row t*g*g is an appended zero token used for spatial padding.
  const std::size_t zero_row = t * g * g;
  const std::array<Tensor, 2> rows{reshape(raw, {t * g * g, d}), Tensor::zeros({1, d})};
  const Tensor table = concat_axis(rows, 0);

  // Edge padding in time keeps a non-zero temporal difference at both ends.
  auto frame_at = [t](std::size_t i, int offset) -> std::size_t {
    const long j = std::clamp(static_cast<long>(i) + offset, 0L, static_cast<long>(t) - 1);
    return static_cast<std::size_t>(j);
  };
  const long pad = 1;
  std::vector<std::size_t> ids;
  ids.reserve(t * tg * tg * 3 * kernel_ * kernel_);
  for (std::size_t f = 0; f < t; ++f) {
    for (std::size_t oy = 0; oy < tg; ++oy) {
      for (std::size_t ox = 0; ox < tg; ++ox) {
        for (int dt = -1; dt <= 1; ++dt) {
          const std::size_t src = frame_at(f, dt);
          for (std::size_t ky = 0; ky < kernel_; ++ky) {
            for (std::size_t kx = 0; kx < kernel_; ++kx) {
              const long y = static_cast<long>(oy * stride_ + ky) - pad;
              const long x = static_cast<long>(ox * stride_ + kx) - pad;
              const bool inside = y >= 0 && x >= 0 && y < static_cast<long>(g) &&
                                  x < static_cast<long>(g);
              ids.push_back(inside ? (src * g + static_cast<std::size_t>(y)) * g +
                                         static_cast<std::size_t>(x)
                                   : zero_row);
            }
          }
        }
      }
    }
  }
  const std::size_t cells = t * tg * tg;
  Tensor windows = reshape(embed_lookup(table, ids), {cells, 3 * kernel_ * kernel_ * d});
  Tensor out = mlp_(windows);
  return reshape(out, {t, tg, tg, out.dim(1)});
}

void StcProjector::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  mlp_.collect(prefix, out);
}

const Tensor& BranchFeatures::operator[](BranchId id) const {
  switch (id) {
    case BranchId::kFace: return face;
    case BranchId::kBody: return body;
    case BranchId::kInteraction: return interaction;
  }
  return face;
}

VisualBranches::VisualBranches(const VisualConfig& config, std::uint64_t seed) : config_(config) {
  Rng enc_rng(derive_seed(seed, "vis_encoder"));
  Rng face_rng(derive_seed(seed, "proj_face"));
  Rng body_rng(derive_seed(seed, "proj_body"));
  Rng inter_rng(derive_seed(seed, "proj_inter"));
  encoder_ = VisualEncoderStub(config, enc_rng);
  face_ = FaceProjector(config, face_rng);
  body_ = StcProjector(config, body_rng);
  interaction_ = StcProjector(config, inter_rng);
}

VideoClip VisualBranches::preprocess(const VideoClip& clip) const {
  if (clip.frames == 0) throw VisualError("empty clip");
  if (clip.channels != config_.channels) {
    throw VisualError("clip has " + std::to_string(clip.channels) + " channels, expected " +
                      std::to_string(config_.channels));
  }
  return resize_clip(clip, config_.input_size);
}

Tensor VisualBranches::encode(const VideoClip& clip) const {
  return encoder_.encode_frames(preprocess(clip));
}

BranchFeatures VisualBranches::project(const Tensor& raw) const {
  return {face_.project(raw), body_.project(raw), interaction_.project(raw)};
}

Tensor VisualBranches::project_one(BranchId id, const Tensor& raw) const {
  switch (id) {
    case BranchId::kFace: return face_.project(raw);
    case BranchId::kBody: return body_.project(raw);
    case BranchId::kInteraction: return interaction_.project(raw);
  }
  throw VisualError("unknown branch");
}

}  // namespace omnifuse::visual
