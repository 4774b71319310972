// Copyright 2026 The OmniFuse Authors
// SPDX-License-Identifier: Apache-2.0

// Deliberately naive reference implementations. They share no code with the
// library and favour obviousness over speed.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace omnifuse::oracle {

/// Word-level Levenshtein distance by memoised top-down recursion.
std::size_t edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

/// Longest common subsequence length by memoised recursion.
std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// |X_k|^2 for k = 0..n/2 via the defining O(n^2) sum.
std::vector<double> dft_power(const std::vector<double>& frame);

/// log10 mel energies of one centred frame (before the dynamic-range clamp),
/// computed from dft_power and triangles evaluated directly in mel space.
std::vector<double> log_mel_frame(const std::vector<double>& samples, std::size_t t);

/// Smallest r with r * q >= p, found by bisection.
std::size_t ceil_div(std::size_t p, std::size_t q);

}  // namespace omnifuse::oracle
