// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace omnifuse::oracle {

std::size_t edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> memo(ref.size() + 1,
                                             std::vector<std::size_t>(hyp.size() + 1, kUnset));
  std::function<std::size_t(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) {
    // Distance between the suffixes ref[i..] and hyp[j..].
    if (i == ref.size()) return hyp.size() - j;
    if (j == hyp.size()) return ref.size() - i;
    std::size_t& slot = memo[i][j];
    if (slot != kUnset) return slot;
    const std::size_t keep = d(i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
    slot = std::min({keep, d(i + 1, j) + 1, d(i, j + 1) + 1});
    return slot;
  };
  return d(0, 0);
}

std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> memo(a.size() + 1, std::vector<std::size_t>(b.size() + 1, kUnset));
  std::function<std::size_t(std::size_t, std::size_t)> f = [&](std::size_t i, std::size_t j) {
    if (i == a.size() || j == b.size()) return std::size_t{0};
    std::size_t& slot = memo[i][j];
    if (slot != kUnset) return slot;
    slot = a[i] == b[j] ? 1 + f(i + 1, j + 1) : std::max(f(i + 1, j), f(i, j + 1));
    return slot;
  };
  return f(0, 0);
}

std::vector<double> dft_power(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
      re += frame[i] * std::cos(a);
      im += frame[i] * std::sin(a);
    }
    out[k] = re * re + im * im;
  }
  return out;
}

std::vector<double> log_mel_frame(const std::vector<double>& samples, std::size_t t) {
  constexpr std::size_t kN = 400, kHop = 160, kBands = 128;
  constexpr double kRate = 16000.0, kTop = 8000.0;
  const long long n = static_cast<long long>(samples.size());
  auto reflect = [&](long long j) {
    while (j < 0 || j >= n) j = j < 0 ? -j : 2 * (n - 1) - j;
    return samples[static_cast<std::size_t>(j)];
  };
  std::vector<double> frame(kN);
  for (std::size_t i = 0; i < kN; ++i) {
    const double hann = std::pow(std::sin(std::numbers::pi * static_cast<double>(i) / kN), 2.0);
    frame[i] = hann * reflect(static_cast<long long>(t * kHop + i) - static_cast<long long>(kN / 2));
  }
  const auto power = dft_power(frame);
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  const double top = mel(kTop);
  const double step = top / static_cast<double>(kBands + 1);
  std::vector<double> out(kBands);
  for (std::size_t m = 0; m < kBands; ++m) {
    // Band m has its peak at mel (m + 1) * step and feet one step either side.
    const double centre = static_cast<double>(m + 1) * step;
    double energy = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) {
      const double x = mel(static_cast<double>(k) * kRate / kN);
      const double lo = centre - step, hi = centre + step;
      if (x <= lo || x >= hi) continue;
      // Linear in Hz between the feet, as an HTK triangle is.
      auto hz = [](double v) { return 700.0 * (std::pow(10.0, v / 2595.0) - 1.0); };
      const double f = static_cast<double>(k) * kRate / kN;
      const double w = x <= centre ? (f - hz(lo)) / (hz(centre) - hz(lo)) : (hz(hi) - f) / (hz(hi) - hz(centre));
      energy += w * power[k];
    }
    out[m] = std::log10(std::max(energy, 1e-10));
  }
  return out;
}

std::size_t ceil_div(std::size_t p, std::size_t q) {
  std::size_t lo = 0, hi = p + 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (mid * q >= p) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace omnifuse::oracle
