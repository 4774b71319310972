// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "omnifuse/audio/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <string>
#include <numbers>

#include "omnifuse/numerics/ops.hpp"

namespace omnifuse::audio {

void AudioWave::validate() const {
  if (samples.empty()) throw AudioError("audio wave is empty");
  if (sample_rate <= 0) throw AudioError("sample rate must be positive");
  for (double s : samples) {
    if (!std::isfinite(s) || std::abs(s) > 1.0 + 1e-9) {
      throw AudioError("audio sample outside [-1, 1]");
    }
  }
}

std::size_t mel_frame_count(std::size_t samples) {
  return (samples + kHopSamples - 1) / kHopSamples;
}

std::size_t encoder_frame_count(std::size_t mel_frames) {
  return (mel_frames + kEncoderStride - 1) / kEncoderStride;
}

std::size_t audio_token_count(std::size_t encoder_frames) {
  return (encoder_frames + kPoolStride - 1) / kPoolStride;
}

AudioWave resample(const AudioWave& wave, int target_rate) {
  if (wave.samples.empty()) throw AudioError("resample: empty input");
  if (wave.sample_rate <= 0 || target_rate <= 0) throw AudioError("resample: rate must be positive");
  if (wave.sample_rate == target_rate) return wave;

  const auto n_in = static_cast<long long>(wave.samples.size());
  const long long src = wave.sample_rate, dst = target_rate;
  const long long n_out = std::max(1LL, (n_in * dst + src / 2) / src);
  AudioWave out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (long long i = 0; i < n_out; ++i) {
    // Position in the source, in exact rational form i * src / dst.
    const long long num = i * src;
    const long long lo = std::min(num / dst, n_in - 1);
    const long long hi = std::min(lo + 1, n_in - 1);
    const double frac = (lo == n_in - 1) ? 0.0 : static_cast<double>(num - lo * dst) / static_cast<double>(dst);
    const double a = wave.samples[static_cast<std::size_t>(lo)];
    const double b = wave.samples[static_cast<std::size_t>(hi)];
    out.samples[static_cast<std::size_t>(i)] = std::clamp(a + frac * (b - a), -1.0, 1.0);
  }
  return out;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

struct MelFilter {
  std::size_t first_bin = 0;
  std::vector<double> weights;
};

// HTK triangles sampled at FFT bin centres. With 128 bands on a 400-point FFT
// the lowest triangles are narrower than one bin, so a few of them catch no
// bin and stay at the log floor.
const std::vector<MelFilter>& mel_filters() {
  static const std::vector<MelFilter> filters = [] {
    const std::size_t bins = kFftSize / 2 + 1;
    const double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(kMelMaxHz);
    std::vector<double> edges(kMelBands + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                        static_cast<double>(kMelBands + 1));
    }
    std::vector<MelFilter> out(kMelBands);
    for (std::size_t m = 0; m < kMelBands; ++m) {
      const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
      MelFilter& f = out[m];
      bool started = false;
      for (std::size_t k = 0; k < bins; ++k) {
        const double hz = static_cast<double>(k) * kSampleRate / static_cast<double>(kFftSize);
        double w = 0.0;
        if (hz > left && hz <= centre) {
          w = (hz - left) / (centre - left);
        } else if (hz > centre && hz < right) {
          w = (right - hz) / (right - centre);
        }
        if (w > 0.0) {
          if (!started) {
            f.first_bin = k;
            started = true;
          }
          f.weights.resize(k - f.first_bin + 1, 0.0);
          f.weights.back() = w;
        }
      }
    }
    return out;
  }();
  return filters;
}

const std::vector<double>& hann_window() {
  static const std::vector<double> window = [] {
    std::vector<double> w(kWindowSamples);
    for (std::size_t i = 0; i < kWindowSamples; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(kWindowSamples));
    }
    return w;
  }();
  return window;
}

// Mirror index without repeating the edge sample; folds as often as needed
// so signals shorter than the pad width still work.
std::size_t reflect_index(long long j, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n - 1);
  long long m = j % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

class RealFft {
 public:
  RealFft() {
    in_ = fftw_alloc_real(kFftSize);
    out_ = fftw_alloc_complex(kFftSize / 2 + 1);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void power(std::vector<double>& spectrum) {
    fftw_execute(plan_);
    spectrum.resize(kFftSize / 2 + 1);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      spectrum[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }
  }

 private:
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

MelSpectrogram log_mel(const AudioWave& wave) {
  if (wave.sample_rate != kSampleRate) {
    throw AudioError("log_mel: expected " + std::to_string(kSampleRate) + " Hz input, got " +
                     std::to_string(wave.sample_rate));
  }
  wave.validate();
  const std::size_t n = wave.samples.size();
  MelSpectrogram mel;
  mel.frames = mel_frame_count(n);
  mel.values.assign(kMelBands * mel.frames, 0.0);

  const auto& window = hann_window();
  const auto& filters = mel_filters();
  RealFft fft;
  std::vector<double> spectrum;
  const long long half = static_cast<long long>(kFftSize / 2);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mel.frames; ++t) {
    const long long centre = static_cast<long long>(t * kHopSamples);
    double* in = fft.input();
    for (std::size_t i = 0; i < kFftSize; ++i) {
      const long long j = centre - half + static_cast<long long>(i);
      in[i] = window[i] * wave.samples[reflect_index(j, n)];
    }
    fft.power(spectrum);
    for (std::size_t m = 0; m < kMelBands; ++m) {
      const MelFilter& f = filters[m];
      double energy = 0.0;
      for (std::size_t k = 0; k < f.weights.size(); ++k) {
        energy += f.weights[k] * spectrum[f.first_bin + k];
      }
      const double v = std::log10(std::max(energy, kLogFloor));
      mel.values[m * mel.frames + t] = v;
      peak = std::max(peak, v);
    }
  }
  for (double& v : mel.values) v = std::max(v, peak - kDynamicRange);
  return mel;
}

AudioEncoderStub::AudioEncoderStub(std::size_t d_audio, Rng& rng)
    : conv_(3 * kMelBands, d_audio, rng), mix_(d_audio, d_audio, rng) {
  // Frozen in every stage; the trainer never flips these.
  conv_.weight.set_requires_grad(false);
  conv_.bias.set_requires_grad(false);
  mix_.weight.set_requires_grad(false);
  mix_.bias.set_requires_grad(false);
  std::normal_distribution<double> dist(0.0, 0.1);
  for (double& b : conv_.bias.mutable_data()) b = dist(rng);
}

Tensor AudioEncoderStub::encode(const MelSpectrogram& mel) const {
  if (mel.frames == 0 || mel.values.size() != kMelBands * mel.frames) {
    throw AudioError("encode_audio: malformed mel spectrogram");
  }
  const std::size_t t_enc = encoder_frame_count(mel.frames);
  std::vector<double> taps(t_enc * 3 * kMelBands, 0.0);
  for (std::size_t t = 0; t < t_enc; ++t) {
    for (std::size_t k = 0; k < 3; ++k) {
      const long long src = static_cast<long long>(t * kEncoderStride + k) - 1;
      if (src < 0 || src >= static_cast<long long>(mel.frames)) continue;
      for (std::size_t m = 0; m < kMelBands; ++m) {
        taps[(t * 3 + k) * kMelBands + m] = mel.at(m, static_cast<std::size_t>(src));
      }
    }
  }
  Tensor x = Tensor::from({t_enc, 3 * kMelBands}, std::move(taps));
  return gelu(mix_(conv_(x)));
}

void AudioEncoderStub::collect(std::vector<NamedTensor>& out) const {
  conv_.collect("audio_encoder.conv", out);
  mix_.collect("audio_encoder.mix", out);
}

AudioProjector::AudioProjector(std::size_t d_audio, std::size_t d_model, Rng& rng)
    : mlp_(d_audio, d_model, d_model, rng) {}

AudioTokens AudioProjector::pool_and_project(const Tensor& frames) const {
  if (frames.rank() != 2 || frames.dim(0) == 0) {
    throw AudioError("pool_and_project: expected [T_enc, d_audio] frames");
  }
  AudioTokens tokens;
  tokens.tokens = mlp_(mean_pool_axis(frames, 0, kPoolStride));
  return tokens;
}

void AudioProjector::collect(std::vector<NamedTensor>& out) const { mlp_.collect("proj_audio", out); }

}  // namespace omnifuse::audio
