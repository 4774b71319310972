// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "omnifuse/numerics/layers.hpp"
#include "omnifuse/numerics/tensor.hpp"

namespace omnifuse::audio {

// Front-end constants. These are fixed; configuration cannot override them.
inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kWindowSamples = 400;  // 25 ms
inline constexpr std::size_t kHopSamples = 160;     // 10 ms
inline constexpr std::size_t kFftSize = 400;
inline constexpr std::size_t kMelBands = 128;
inline constexpr double kMelMaxHz = 8000.0;
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kDynamicRange = 8.0;        // log10 units, i.e. 80 dB
inline constexpr std::size_t kEncoderStride = 2;
inline constexpr std::size_t kPoolStride = 3;
inline constexpr double kTokenSpanMs = 60.0;

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AudioWave {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  /// Throws AudioError when empty, rate is non-positive, or |sample| > 1.
  void validate() const;
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

/// Log-mel matrix, stored band-major: values[band * frames + t].
struct MelSpectrogram {
  std::size_t frames = 0;
  std::vector<double> values;

  double at(std::size_t band, std::size_t t) const { return values[band * frames + t]; }
  static constexpr std::size_t n_mels() { return kMelBands; }
  static constexpr std::size_t window_samples() { return kWindowSamples; }
  static constexpr std::size_t hop_samples() { return kHopSamples; }
  static constexpr int sample_rate() { return kSampleRate; }
};

struct AudioTokens {
  Tensor tokens;  // [T_a, d_model]
  double frame_span_ms = kTokenSpanMs;

  std::size_t count() const { return tokens.dim(0); }
};

// Timing chain: samples -> mel frames -> encoder frames -> audio tokens.
std::size_t mel_frame_count(std::size_t samples);
std::size_t encoder_frame_count(std::size_t mel_frames);
std::size_t audio_token_count(std::size_t encoder_frames);

/// Linear-interpolation resampler. Output length is round(n * target / source),
/// exact for integral ratios; values are clamped to [-1, 1].
AudioWave resample(const AudioWave& wave, int target_rate = kSampleRate);

/// Hann-windowed power STFT (centred, reflect-padded), HTK triangular mel
/// filterbank over 0-8 kHz, log10 with a 1e-10 floor, and a clip-max
/// referenced clamp at 80 dB below the peak.
MelSpectrogram log_mel(const AudioWave& wave);

/// Stand-in for a pretrained audio encoder that keeps its temporal contract:
/// a kernel-3, stride-2 convolution over mel frames, a linear mix, then GeLU.
class AudioEncoderStub {
 public:
  AudioEncoderStub() = default;
  AudioEncoderStub(std::size_t d_audio, Rng& rng);

  /// [ceil(T_mel / 2), d_audio].
  Tensor encode(const MelSpectrogram& mel) const;
  std::size_t width() const { return mix_.bias.numel(); }
  void collect(std::vector<NamedTensor>& out) const;

 private:
  Linear conv_;
  Linear mix_;
};

/// Stride-3 average pooling followed by the two-layer GeLU projector into the
/// decoder embedding space.
class AudioProjector {
 public:
  AudioProjector() = default;
  AudioProjector(std::size_t d_audio, std::size_t d_model, Rng& rng);

  AudioTokens pool_and_project(const Tensor& frames) const;
  void collect(std::vector<NamedTensor>& out) const;

 private:
  Mlp2 mlp_;
};

/// 16-bit PCM little-endian WAV; multichannel input keeps the first channel.
AudioWave read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioWave& wave);

}  // namespace omnifuse::audio
