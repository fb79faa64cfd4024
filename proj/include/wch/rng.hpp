// SPDX-License-Identifier: Apache-2.0
//
// wchlab - dimensionality-guided sizing laboratory for wireless channel models
// Copyright (C) 2026 the wchlab authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef WCH_RNG_HPP
#define WCH_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>

namespace wch {

// All randomness in the library flows through CounterRng, a counter-based
// generator built on the SplitMix64 output function:
//
//     out(seed, n) = mix64(seed + n * 0x9E3779B97F4A7C15)
//
// where mix64 is the standard SplitMix64 finalizer (Steele/Lea/Flood 2014).
// Because the state is just (seed, counter), any draw is addressable: stream
// seeds for independent substreams are derived with hash_seed(), and the
// k-th value of a stream never depends on how other streams were consumed.
// This is what makes datasets, masks, and noise bit-reproducible and safe to
// generate in parallel.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives the seed of an independent substream, e.g. per-sample streams from
/// a dataset seed: stream i of seed s starts at mix64(s ^ mix64(i + golden)).
inline std::uint64_t hash_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ mix64(stream + kGolden));
}

inline std::uint64_t hash_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return hash_seed(hash_seed(seed, a), b);
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed), counter_(0) {}

    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : CounterRng(hash_seed(seed, stream)) {}

    std::uint64_t next_u64() { return mix64(seed_ + (++counter_) * kGolden); }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double next_double_open() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Uses rejection to stay unbiased.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = n * ((~std::uint64_t(0)) / n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via the Marsaglia polar method (no trig, so the value
    /// stream depends only on sqrt/log of the libm in use). Consumes draws in
    /// pairs and caches the second value.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    /// Circularly symmetric complex normal with E|z|^2 = 1.
    std::complex<double> next_cgaussian() {
        const double re = next_gaussian();
        const double im = next_gaussian();
        return {re * 0.7071067811865476, im * 0.7071067811865476};
    }

    /// Exponential with the given mean.
    double next_exponential(double mean) { return -mean * std::log(next_double_open()); }

    /// Zero-mean Laplacian with the given scale (mean absolute deviation).
    double next_laplacian(double scale) {
        const double u = next_double() - 0.5;
        const double mag = -std::log(1.0 - 2.0 * std::abs(u));
        return (u < 0.0 ? -scale : scale) * mag;
    }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace wch

#endif
