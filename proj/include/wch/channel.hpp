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

#ifndef WCH_CHANNEL_HPP
#define WCH_CHANNEL_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "wch/errors.hpp"
#include "wch/parallel.hpp"
#include "wch/rng.hpp"

namespace wch::synth {

/// Parameters of one synthetic propagation scenario.
///
/// The generator is a Saleh-Valenzuela-style cluster channel over a uniform
/// linear array: a line-of-sight path plus n_clusters scatterer clusters,
/// each contributing rays_per_cluster plane waves with Laplacian angle
/// spread around the cluster direction and exponentially decaying cluster
/// power (decay constant = delay_spread). Scattering complexity is
/// controlled by n_clusters / rays_per_cluster / angle_spread_deg, the
/// LoS-vs-NLOS balance by rician_k_db, and geometry by elevation_deg.
struct ScenarioConfig {
    std::uint32_t n_antennas = 128;
    std::uint32_t n_subcarriers = 76;
    std::uint32_t n_clusters = 8;
    std::uint32_t rays_per_cluster = 8;
    double rician_k_db = 5.0;      // -inf = pure NLOS
    double delay_spread = 100e-9;  // seconds
    double bandwidth = 15.36e6;    // Hz
    double carrier_freq = 20e9;    // Hz
    double angle_spread_deg = 5.0; // per-cluster ray spread
    double elevation_deg = 45.0;   // higher elevation -> fewer effective clusters
    std::uint64_t seed = 0;
};

inline void validate(const ScenarioConfig &c) {
    require(c.n_antennas >= 1, ErrorCode::invalid_argument, "n_antennas must be >= 1");
    require(c.n_subcarriers >= 2, ErrorCode::invalid_argument, "n_subcarriers must be >= 2");
    require(c.n_clusters >= 1, ErrorCode::invalid_argument, "n_clusters must be >= 1");
    require(c.rays_per_cluster >= 1, ErrorCode::invalid_argument, "rays_per_cluster must be >= 1");
    require(c.delay_spread > 0.0, ErrorCode::invalid_argument, "delay_spread must be > 0");
    require(c.bandwidth > 0.0, ErrorCode::invalid_argument, "bandwidth must be > 0");
    require(c.carrier_freq > 0.0, ErrorCode::invalid_argument, "carrier_freq must be > 0");
    require(c.angle_spread_deg >= 0.0, ErrorCode::invalid_argument, "angle_spread_deg must be >= 0");
    require(c.elevation_deg >= 0.0 && c.elevation_deg <= 90.0, ErrorCode::invalid_argument,
            "elevation_deg must be in [0, 90]");
    require(!std::isnan(c.rician_k_db), ErrorCode::invalid_argument, "rician_k_db must not be NaN");
}

/// Complex frequency response over the antenna x subcarrier grid.
/// Entries are stored row-major as 32-bit complex floats, which is also the
/// on-disk sample format, so save/load round-trips are bit-exact.
struct ChannelMatrix {
    std::uint32_t n_antennas = 0;
    std::uint32_t n_subcarriers = 0;
    std::vector<std::complex<float>> h; // [antenna * n_subcarriers + subcarrier]

    ChannelMatrix() = default;
    ChannelMatrix(std::uint32_t rows, std::uint32_t cols)
        : n_antennas(rows), n_subcarriers(cols),
          h(std::size_t(rows) * cols, std::complex<float>(0.0f, 0.0f)) {}

    std::complex<float> &at(std::uint32_t m, std::uint32_t k) {
        return h[std::size_t(m) * n_subcarriers + k];
    }
    const std::complex<float> &at(std::uint32_t m, std::uint32_t k) const {
        return h[std::size_t(m) * n_subcarriers + k];
    }
    std::size_t size() const { return h.size(); }

    bool same_shape(const ChannelMatrix &o) const {
        return n_antennas == o.n_antennas && n_subcarriers == o.n_subcarriers;
    }
};

struct ChannelDataset {
    std::vector<ChannelMatrix> samples;
    ScenarioConfig config;
    std::string scenario_id;
};

/// Mean per-entry power of a channel matrix.
inline double mean_entry_power(const ChannelMatrix &m) {
    require(!m.h.empty(), ErrorCode::invalid_argument, "empty channel matrix");
    double acc = 0.0;
    for (const auto &z : m.h)
        acc += double(z.real()) * z.real() + double(z.imag()) * z.imag();
    return acc / double(m.h.size());
}

/// Array response of a uniform linear array: entry m is
/// exp(-i * 2*pi * spacing * m * sin(angle)).
inline std::vector<std::complex<double>> steering_vector(std::uint32_t n_antennas,
                                                         double angle_deg,
                                                         double spacing_wavelengths) {
    require(n_antennas >= 1, ErrorCode::invalid_argument, "n_antennas must be >= 1");
    require(spacing_wavelengths > 0.0, ErrorCode::invalid_argument, "spacing must be > 0");
    require(std::isfinite(angle_deg), ErrorCode::invalid_argument, "angle must be finite");
    const double phase_step =
        -2.0 * M_PI * spacing_wavelengths * std::sin(angle_deg * M_PI / 180.0);
    std::vector<std::complex<double>> a(n_antennas);
    for (std::uint32_t m = 0; m < n_antennas; ++m)
        a[m] = std::polar(1.0, phase_step * double(m));
    return a;
}

/// Baseband frequency of subcarrier k on the centered grid.
inline double subcarrier_freq(const ScenarioConfig &c, std::uint32_t k) {
    return (double(k) - double(c.n_subcarriers) / 2.0) * (c.bandwidth / double(c.n_subcarriers));
}

/// Antenna spacing used for all synthetic scenarios (half wavelength).
inline constexpr double kArraySpacing = 0.5;

/// Maximum ray delay as a multiple of the delay spread.
inline constexpr double kDelayTruncation = 4.0;

namespace detail {

/// Elevation geometry: clusters thin out toward zenith and the K-factor grows
/// by 10 dB, so high elevation means fewer, more LoS-like paths.
inline std::uint32_t effective_clusters(const ScenarioConfig &c) {
    const double scaled = double(c.n_clusters) * (1.0 - 0.7 * c.elevation_deg / 90.0);
    const double rounded = std::floor(scaled + 0.5);
    return std::uint32_t(std::max(1.0, rounded));
}

inline double effective_k_db(const ScenarioConfig &c) {
    if (std::isinf(c.rician_k_db))
        return c.rician_k_db;
    return c.rician_k_db + 10.0 * (c.elevation_deg / 90.0);
}

} // namespace detail

/// Generates one channel realization. Pure function of (config, sample_index):
/// sample i consumes the counter stream seeded with hash_seed(config.seed, i),
/// so identical arguments give bit-identical matrices and samples can be
/// generated in parallel.
inline ChannelMatrix synthesize_channel(const ScenarioConfig &config,
                                        std::uint64_t sample_index) {
    validate(config);
    CounterRng rng(hash_seed(config.seed, sample_index));

    const std::uint32_t n_ant = config.n_antennas;
    const std::uint32_t n_sub = config.n_subcarriers;
    const std::uint32_t n_clusters = detail::effective_clusters(config);
    const std::uint32_t n_rays = config.rays_per_cluster;

    // Power split between the LoS path and the scattered field. With
    // k = K/(K+1) the per-entry expected power is exactly 1 by construction:
    // steering entries and delay phasors are unit magnitude and ray gains
    // carry variance cluster_power / rays_per_cluster.
    const double k_db = detail::effective_k_db(config);
    double los_power; // K/(K+1)
    if (std::isinf(k_db))
        los_power = k_db > 0.0 ? 1.0 : 0.0;
    else {
        const double k_lin = std::pow(10.0, k_db / 10.0);
        los_power = k_lin / (k_lin + 1.0);
    }
    const double nlos_power = 1.0 - los_power;

    // Draw order is part of the format: LoS angle, LoS phase, then per
    // cluster (angle, delay), then per cluster per ray (angle offset, delay
    // jitter, complex gain).
    const double los_angle = (rng.next_double() * 2.0 - 1.0) * 60.0;
    const double los_phase = rng.next_double() * 2.0 * M_PI;

    std::vector<double> cluster_angle(n_clusters), cluster_delay(n_clusters),
        cluster_power(n_clusters);
    const double max_delay = kDelayTruncation * config.delay_spread;
    double power_sum = 0.0;
    for (std::uint32_t c = 0; c < n_clusters; ++c) {
        cluster_angle[c] = (rng.next_double() * 2.0 - 1.0) * 60.0;
        double tau;
        do {
            tau = rng.next_exponential(config.delay_spread);
        } while (tau > max_delay);
        cluster_delay[c] = tau;
        cluster_power[c] = std::exp(-tau / config.delay_spread);
        power_sum += cluster_power[c];
    }
    for (auto &p : cluster_power)
        p /= power_sum;

    std::vector<std::complex<double>> acc(std::size_t(n_ant) * n_sub,
                                          std::complex<double>(0.0, 0.0));

    if (los_power > 0.0) {
        const auto a = steering_vector(n_ant, los_angle, kArraySpacing);
        const std::complex<double> amp = std::polar(std::sqrt(los_power), los_phase);
        for (std::uint32_t m = 0; m < n_ant; ++m) {
            const std::complex<double> g = amp * a[m];
            for (std::uint32_t k = 0; k < n_sub; ++k)
                acc[std::size_t(m) * n_sub + k] += g; // zero delay: flat in frequency
        }
    }

    if (nlos_power > 0.0) {
        const double amp_scale = std::sqrt(nlos_power);
        std::vector<std::complex<double>> phasor(n_sub);
        for (std::uint32_t c = 0; c < n_clusters; ++c) {
            const double gain_std = std::sqrt(cluster_power[c] / double(n_rays));
            for (std::uint32_t r = 0; r < n_rays; ++r) {
                const double angle = cluster_angle[c] + rng.next_laplacian(config.angle_spread_deg);
                const double tau =
                    std::min(cluster_delay[c] + rng.next_exponential(config.delay_spread / 8.0),
                             max_delay);
                const std::complex<double> gain = amp_scale * gain_std * rng.next_cgaussian();
                const auto a = steering_vector(n_ant, angle, kArraySpacing);
                for (std::uint32_t k = 0; k < n_sub; ++k)
                    phasor[k] = std::polar(1.0, -2.0 * M_PI * subcarrier_freq(config, k) * tau);
                for (std::uint32_t m = 0; m < n_ant; ++m) {
                    const std::complex<double> g = gain * a[m];
                    std::complex<double> *row = acc.data() + std::size_t(m) * n_sub;
                    for (std::uint32_t k = 0; k < n_sub; ++k)
                        row[k] += g * phasor[k];
                }
            }
        }
    }

    ChannelMatrix out(n_ant, n_sub);
    for (std::size_t i = 0; i < acc.size(); ++i)
        out.h[i] = std::complex<float>(float(acc[i].real()), float(acc[i].imag()));
    return out;
}

inline ChannelDataset synthesize_dataset(const ScenarioConfig &config, std::uint32_t n_samples,
                                         const std::string &scenario_id = "") {
    validate(config);
    require(n_samples >= 1, ErrorCode::invalid_argument, "n_samples must be >= 1");
    ChannelDataset ds;
    ds.config = config;
    ds.scenario_id = scenario_id;
    ds.samples.resize(n_samples);
    parallel_for(n_samples, [&](std::size_t i) {
        ds.samples[i] = synthesize_channel(config, i);
    });
    return ds;
}

/// Adds i.i.d. complex Gaussian noise so that per-entry noise variance equals
/// (mean per-entry power of h) / 10^(snr_db/10). Deterministic in noise_seed.
inline ChannelMatrix add_awgn(const ChannelMatrix &h, double snr_db, std::uint64_t noise_seed) {
    require(std::isfinite(snr_db), ErrorCode::invalid_argument, "snr_db must be finite");
    const double noise_var = mean_entry_power(h) * std::pow(10.0, -snr_db / 10.0);
    const double scale = std::sqrt(noise_var);
    CounterRng rng(noise_seed);
    ChannelMatrix out = h;
    for (auto &z : out.h) {
        const std::complex<double> n = rng.next_cgaussian();
        z = std::complex<float>(float(z.real() + scale * n.real()),
                                float(z.imag() + scale * n.imag()));
    }
    return out;
}

} // namespace wch::synth

#endif
