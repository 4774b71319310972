// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "omnifuse/numerics/gradcheck.hpp"
#include "omnifuse/numerics/ops.hpp"
#include "omnifuse/visual/visual.hpp"

using namespace omnifuse;
using namespace omnifuse::visual;

namespace {

VideoClip random_clip(std::size_t frames, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VideoClip clip = VideoClip::blank(frames, size, size);
  for (double& p : clip.pixels) p = u(rng);
  return clip;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

// Frame t of a [T, g, g, d] grid as a flat vector.
std::vector<double> frame_slice(const Tensor& grid, std::size_t t) {
  const std::size_t per = grid.numel() / grid.dim(0);
  return {grid.data().begin() + static_cast<std::ptrdiff_t>(t * per),
          grid.data().begin() + static_cast<std::ptrdiff_t>((t + 1) * per)};
}

VisualConfig small_config() {
  VisualConfig c;
  c.input_size = 16;
  c.patch = 4;
  c.target_grid = 2;
  c.d_enc = 4;
  c.d_model = 3;
  return c;
}

}  // namespace

TEST_CASE("default branches emit aligned (4,4,4,d_model) grids") {
  const VisualBranches branches(VisualConfig{}, 1);
  const VideoClip clip = random_clip(4, 64, 2);
  const Tensor raw = branches.encode(clip);
  CHECK(raw.shape() == Shape{4, 8, 8, 32});
  const BranchFeatures f = branches.project(raw);
  CHECK(f.face.shape() == Shape{4, 4, 4, 32});
  CHECK(f.body.shape() == f.face.shape());
  CHECK(f.interaction.shape() == f.face.shape());
  CHECK_FALSE(same_bits(f.body, f.interaction));
}

TEST_CASE("alignment holds for other clip sizes and lengths") {
  const VisualBranches branches(VisualConfig{}, 3);
  for (std::size_t frames : {1u, 2u, 3u, 6u}) {
    for (std::size_t size : {32u, 64u, 100u}) {
      const BranchFeatures f = branches.forward(random_clip(frames, size, frames * 100 + size));
      CHECK(f.face.shape() == Shape{frames, 4, 4, 32});
      CHECK(f.body.shape() == f.face.shape());
      CHECK(f.interaction.shape() == f.face.shape());
    }
  }
}

TEST_CASE("black frames differ only by positional offsets") {
  const VisualBranches branches(VisualConfig{}, 4);
  const Tensor raw = branches.encode(VideoClip::blank(2, 64, 64));
  const std::size_t d = 32, g = 8;
  // Every frame is the same bias + positional pattern.
  CHECK(frame_slice(raw, 0) == frame_slice(raw, 1));
  bool any_differs = false;
  for (std::size_t c = 0; c < d; ++c) any_differs |= raw[c] != raw[(g * g - 1) * d + c];
  CHECK(any_differs);
}

TEST_CASE("encoding commutes with frame permutation") {
  const VisualBranches branches(VisualConfig{}, 5);
  const VideoClip clip = random_clip(3, 64, 6);
  VideoClip shuffled = clip;
  const std::size_t per = 64 * 64 * 3;
  const std::size_t order[] = {2, 0, 1};
  for (std::size_t t = 0; t < 3; ++t) {
    std::copy_n(clip.pixels.begin() + static_cast<std::ptrdiff_t>(order[t] * per), per,
                shuffled.pixels.begin() + static_cast<std::ptrdiff_t>(t * per));
  }
  const Tensor a = branches.encode(clip);
  const Tensor b = branches.encode(shuffled);
  for (std::size_t t = 0; t < 3; ++t) CHECK(frame_slice(b, t) == frame_slice(a, order[t]));
}

TEST_CASE("constant raw tokens give constant face output") {
  const VisualBranches branches(VisualConfig{}, 7);
  const Tensor raw = Tensor::full({2, 8, 8, 32}, 0.25);
  const Tensor face = branches.project_one(BranchId::kFace, raw);
  for (std::size_t i = 0; i < face.numel(); ++i) CHECK(face[i] == doctest::Approx(face[i % 32]).epsilon(1e-13));
  // STC windows at the border see spatial zero padding; interior windows agree.
  for (BranchId id : {BranchId::kBody, BranchId::kInteraction}) {
    const Tensor out = branches.project_one(id, raw);
    auto cell = [&](std::size_t t, std::size_t y, std::size_t x, std::size_t c) {
      return out[((t * 4 + y) * 4 + x) * 32 + c];
    };
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t y = 1; y < 3; ++y) {
        for (std::size_t x = 1; x < 3; ++x) {
          for (std::size_t c = 0; c < 32; ++c) CHECK(cell(t, y, x, c) == doctest::Approx(cell(0, 1, 1, c)).epsilon(1e-13));
        }
      }
    }
  }
}

TEST_CASE("temporally constant input stays temporally constant through STC") {
  const VisualBranches branches(VisualConfig{}, 8);
  VideoClip clip = random_clip(1, 64, 9);
  VideoClip repeated = VideoClip::blank(4, 64, 64);
  for (std::size_t t = 0; t < 4; ++t) {
    std::copy(clip.pixels.begin(), clip.pixels.end(),
              repeated.pixels.begin() + static_cast<std::ptrdiff_t>(t * clip.pixels.size()));
  }
  const BranchFeatures f = branches.forward(repeated);
  for (std::size_t t = 1; t < 4; ++t) {
    const auto a = frame_slice(f.body, 0), b = frame_slice(f.body, t);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-13));
  }
  // A single frame goes through the same temporal kernel without error.
  const BranchFeatures single = branches.forward(clip);
  CHECK(single.body.dim(0) == 1);
  const auto a = frame_slice(single.body, 0), b = frame_slice(f.body, 0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
}

TEST_CASE("zeroed output layers reduce every branch to its bias grid") {
  VisualBranches branches(small_config(), 10);
  for (Mlp2* mlp : {&branches.face().mlp(), &branches.body().mlp(), &branches.interaction().mlp()}) {
    for (double& w : mlp->second.weight.mutable_data()) w = 0.0;
    for (double& b : mlp->second.bias.mutable_data()) b = 0.0;
  }
  const BranchFeatures f = branches.forward(random_clip(2, 16, 11));
  for (double v : f.face.data()) CHECK(v == 0.0);
  CHECK(same_bits(f.face, f.body));
  CHECK(same_bits(f.face, f.interaction));
}

TEST_CASE("branch forward is an exact function") {
  const VisualBranches a(VisualConfig{}, 12), b(VisualConfig{}, 12);
  const VideoClip clip = random_clip(2, 64, 13);
  const BranchFeatures fa = a.forward(clip), fb = b.forward(clip);
  CHECK(same_bits(fa.face, fb.face));
  CHECK(same_bits(fa.body, fb.body));
  CHECK(same_bits(fa.interaction, fb.interaction));
}

TEST_CASE("encoder weights are frozen") {
  const VisualBranches branches(VisualConfig{}, 14);
  std::vector<NamedTensor> params;
  branches.encoder().collect(params);
  REQUIRE_FALSE(params.empty());
  for (const auto& p : params) CHECK_FALSE(p.tensor.requires_grad());
}

TEST_CASE("projector gradients match finite differences") {
  const VisualBranches branches(small_config(), 15);
  const Tensor raw = branches.encode(random_clip(3, 16, 16));
  for (BranchId id : kAllBranches) {
    std::vector<NamedTensor> params;
    if (id == BranchId::kFace) {
      branches.face().collect("face", params);
    } else {
      (id == BranchId::kBody ? branches.body() : branches.interaction()).collect("stc", params);
    }
    auto loss = [&] {
      const Tensor out = branches.project_one(id, raw);
      return sum(mul(out, out));
    };
    for (auto& p : params) p.tensor.zero_grad();
    backward(loss());
    for (auto& p : params) {
      const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
      const Tensor numeric = finite_diff_grad_inplace([&] { return loss().item(); }, p.tensor);
      INFO(branch_name(id) << " " << p.name);
      CHECK(max_relative_error(analytic, numeric.data()) <= 1e-4);
    }
  }
}

TEST_CASE("invalid clips and grids are rejected") {
  const VisualBranches branches(VisualConfig{}, 17);
  CHECK_THROWS_AS(branches.encode(VideoClip{}), VisualError);
  VideoClip bright = random_clip(1, 8, 18);
  bright.pixels[0] = 1.5;
  CHECK_THROWS_AS(bright.validate(), VisualError);
  CHECK_THROWS_AS(branches.encode(VideoClip::blank(1, 64, 64, 1)), VisualError);
  CHECK_THROWS_AS(branches.project_one(BranchId::kFace, Tensor::zeros({1, 2, 2, 32})), VisualError);
  CHECK_THROWS_AS(branches.project_one(BranchId::kBody, Tensor::zeros({1, 2, 2, 32})), VisualError);
  CHECK_THROWS_AS(parse_branch("torso"), VisualError);
  CHECK(parse_branch("interaction") == BranchId::kInteraction);
  CHECK(branch_name(BranchId::kFace) == "face");
}

TEST_CASE("raw clip files round trip") {
  const VideoClip clip = random_clip(2, 8, 19);
  const auto path = std::filesystem::temp_directory_path() / "omnifuse_visual_clip.bin";
  write_raw_clip(path, clip);
  const VideoClip back = read_raw_clip(path);
  CHECK(back.frames == 2);
  CHECK(back.height == 8);
  CHECK(back.pixels.size() == clip.pixels.size());
  for (std::size_t i = 0; i < clip.pixels.size(); ++i) CHECK(back.pixels[i] == doctest::Approx(clip.pixels[i]).epsilon(1e-6));
  std::filesystem::remove(path);
}

TEST_CASE("ppm frame directories load in name order") {
  const VideoClip clip = random_clip(2, 8, 20);
  const auto dir = std::filesystem::temp_directory_path() / "omnifuse_visual_frames";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_ppm(dir / "f000.ppm", clip, 0);
  write_ppm(dir / "f001.ppm", clip, 1);
  const VideoClip back = read_frames_dir(dir, 2.0);
  CHECK(back.frames == 2);
  CHECK(back.fps == 2.0);
  for (std::size_t i = 0; i < clip.pixels.size(); ++i) CHECK(std::abs(back.pixels[i] - clip.pixels[i]) <= 0.5 / 255.0 + 1e-12);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_frames_dir(dir), VisualError);
}
