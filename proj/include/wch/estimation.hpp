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

#ifndef WCH_ESTIMATION_HPP
#define WCH_ESTIMATION_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "wch/channel.hpp"
#include "wch/errors.hpp"
#include "wch/mae.hpp"

namespace wch::est {

// ---------------------------------------------------------------------------
// Pilot pattern
// ---------------------------------------------------------------------------

/// Comb-type pilot layout across subcarriers: every `spacing`-th subcarrier
/// starting at `offset` carries the known unit-magnitude pilot symbol on all
/// antennas.  With the default spacing of 8 the overhead is 12.5%.
struct PilotPattern {
    std::uint32_t spacing = 8;
    std::uint32_t offset = 0;
    std::complex<float> symbol{1.0f, 0.0f};
};

/// Subcarrier indices carrying pilots under `p` on an n_subcarriers-wide grid.
/// Any usable pattern must yield at least two pilots (interpolation needs a
/// span), so fewer than two is rejected.
inline std::vector<std::uint32_t> pilot_columns(const PilotPattern &p,
                                                std::uint32_t n_subcarriers) {
    require(p.spacing >= 1, ErrorCode::invalid_argument, "pilot spacing must be >= 1");
    require(p.offset < p.spacing, ErrorCode::invalid_argument,
            "pilot offset must be < spacing");
    std::vector<std::uint32_t> cols;
    for (std::uint32_t k = p.offset; k < n_subcarriers; k += p.spacing)
        cols.push_back(k);
    require(cols.size() >= 2, ErrorCode::invalid_argument,
            "pilot pattern yields fewer than 2 pilot subcarriers");
    return cols;
}

/// Fraction of subcarriers spent on pilots.
inline double pilot_overhead(const PilotPattern &p, std::uint32_t n_subcarriers) {
    return double(pilot_columns(p, n_subcarriers).size()) / double(n_subcarriers);
}

/// A dense matrix over a subset of subcarrier columns: values is
/// n_antennas x columns.size(), with values column j holding grid subcarrier
/// columns[j].  Used both for received pilot observations and LS estimates.
struct PilotColumns {
    std::vector<std::uint32_t> columns;
    synth::ChannelMatrix values;
};

/// Copies the listed subcarrier columns out of a full channel matrix.
inline synth::ChannelMatrix extract_columns(const synth::ChannelMatrix &h,
                                            const std::vector<std::uint32_t> &columns) {
    require(!columns.empty(), ErrorCode::invalid_argument, "no columns to extract");
    synth::ChannelMatrix out(h.n_antennas, std::uint32_t(columns.size()));
    for (std::uint32_t m = 0; m < h.n_antennas; ++m)
        for (std::uint32_t j = 0; j < columns.size(); ++j) {
            require(columns[j] < h.n_subcarriers, ErrorCode::invalid_argument,
                    "column index out of range");
            out.at(m, j) = h.at(m, columns[j]);
        }
    return out;
}

/// Simulates pilot reception on a true channel: Y[m, k_p] = H_noisy[m, k_p] * x
/// where H_noisy = H + AWGN at the requested SNR (noise power referenced to the
/// mean per-entry power of H).  Deterministic in noise_seed.
inline PilotColumns receive_pilots(const synth::ChannelMatrix &h_true, const PilotPattern &p,
                                   double snr_db, std::uint64_t noise_seed) {
    PilotColumns y;
    y.columns = pilot_columns(p, h_true.n_subcarriers);
    const synth::ChannelMatrix noisy = synth::add_awgn(h_true, snr_db, noise_seed);
    y.values = extract_columns(noisy, y.columns);
    for (auto &z : y.values.h)
        z *= p.symbol;
    return y;
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Least-squares estimate at pilot positions: Ĥ[m, k_p] = Y[m, k_p] / x.
/// Non-pilot positions are simply absent from the result.
inline PilotColumns ls_pilot_estimate(const PilotColumns &y, const PilotPattern &p) {
    require(std::abs(p.symbol) > 0.0f, ErrorCode::invalid_argument,
            "pilot symbol must be non-zero");
    PilotColumns est = y;
    const std::complex<float> inv = std::complex<float>(1.0f, 0.0f) / p.symbol;
    for (auto &z : est.values.h)
        z *= inv;
    return est;
}

/// Fills the full grid from pilot-position estimates: per antenna, real and
/// imaginary parts are independently linearly interpolated between adjacent
/// pilots; edge subcarriers outside the pilot span hold the nearest pilot
/// value.
inline synth::ChannelMatrix interpolate_linear(const PilotColumns &est,
                                               std::uint32_t n_subcarriers) {
    const auto &cols = est.columns;
    require(cols.size() >= 2, ErrorCode::invalid_argument,
            "linear interpolation needs at least 2 pilot columns");
    require(est.values.n_subcarriers == cols.size(), ErrorCode::invalid_shape,
            "pilot value matrix does not match the column list");
    require(std::is_sorted(cols.begin(), cols.end()) &&
                std::adjacent_find(cols.begin(), cols.end()) == cols.end(),
            ErrorCode::invalid_argument, "pilot columns must be strictly increasing");
    require(cols.back() < n_subcarriers, ErrorCode::invalid_argument,
            "pilot column index out of range");

    synth::ChannelMatrix out(est.values.n_antennas, n_subcarriers);
    for (std::uint32_t m = 0; m < out.n_antennas; ++m) {
        std::size_t j = 0; // current pilot segment [cols[j], cols[j+1]]
        for (std::uint32_t k = 0; k < n_subcarriers; ++k) {
            if (k <= cols.front()) {
                out.at(m, k) = est.values.at(m, 0);
                continue;
            }
            if (k >= cols.back()) {
                out.at(m, k) = est.values.at(m, std::uint32_t(cols.size() - 1));
                continue;
            }
            while (cols[j + 1] < k)
                ++j;
            const double t = double(k - cols[j]) / double(cols[j + 1] - cols[j]);
            const std::complex<float> a = est.values.at(m, std::uint32_t(j));
            const std::complex<float> b = est.values.at(m, std::uint32_t(j + 1));
            out.at(m, k) = std::complex<float>(float((1.0 - t) * a.real() + t * b.real()),
                                               float((1.0 - t) * a.imag() + t * b.imag()));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metric
// ---------------------------------------------------------------------------

/// 10*log10( sum |h_hat - h|^2 / sum |h|^2 ) over all entries.  Exact equality
/// returns -infinity.
inline double nmse_db(const synth::ChannelMatrix &h_hat, const synth::ChannelMatrix &h_true) {
    require(h_hat.same_shape(h_true), ErrorCode::invalid_shape,
            "nmse_db requires matching shapes");
    double err = 0.0, sig = 0.0;
    for (std::size_t i = 0; i < h_true.h.size(); ++i) {
        const std::complex<double> d{double(h_hat.h[i].real()) - double(h_true.h[i].real()),
                                     double(h_hat.h[i].imag()) - double(h_true.h[i].imag())};
        err += d.real() * d.real() + d.imag() * d.imag();
        sig += double(h_true.h[i].real()) * double(h_true.h[i].real()) +
               double(h_true.h[i].imag()) * double(h_true.h[i].imag());
    }
    require(sig > 0.0, ErrorCode::invalid_argument, "nmse_db needs a non-zero truth");
    if (err == 0.0)
        return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(err / sig);
}

// ---------------------------------------------------------------------------
// Model-based estimation
// ---------------------------------------------------------------------------

struct EstimationResult {
    synth::ChannelMatrix h_hat;
    double nmse_db = std::numeric_limits<double>::quiet_NaN();
    std::string method;
    double snr_db = 0.0;
};

namespace detail {

/// Spreads pilot-column values onto an otherwise-zero full grid.
inline synth::ChannelMatrix pilot_partial_grid(const PilotColumns &ls, std::uint32_t grid_rows,
                                               std::uint32_t grid_cols) {
    require(ls.values.n_antennas == grid_rows, ErrorCode::invalid_shape,
            "pilot observation antenna count does not match the model grid");
    synth::ChannelMatrix partial(grid_rows, grid_cols);
    for (std::uint32_t j = 0; j < ls.columns.size(); ++j) {
        require(ls.columns[j] < grid_cols, ErrorCode::invalid_shape,
                "pilot column outside the model grid");
        for (std::uint32_t m = 0; m < grid_rows; ++m)
            partial.at(m, ls.columns[j]) = ls.values.at(m, j);
    }
    return partial;
}

/// Token visibility for a pilot layout: a patch is visible iff its subcarrier
/// range contains at least one pilot column.  (Pilot observations cover every
/// antenna, so visibility depends only on the patch's column span.)
inline std::vector<std::uint8_t> pilot_token_visibility(const mae::ModelConfig &cfg,
                                                        const std::vector<std::uint32_t> &cols) {
    const std::uint32_t patches_per_row = cfg.grid_cols / cfg.patch_cols;
    const std::uint32_t patches_per_col = cfg.grid_rows / cfg.patch_rows;
    std::vector<std::uint8_t> col_has_pilot(patches_per_row, 0);
    for (const auto k : cols)
        col_has_pilot[k / cfg.patch_cols] = 1;
    std::vector<std::uint8_t> visible(std::size_t(patches_per_row) * patches_per_col, 0);
    for (std::uint32_t pr = 0; pr < patches_per_col; ++pr)
        for (std::uint32_t pc = 0; pc < patches_per_row; ++pc)
            visible[std::size_t(pr) * patches_per_row + pc] = col_has_pilot[pc];
    return visible;
}

} // namespace detail

/// Model-based reconstruction seeded by LS pilot estimates: pilot columns are
/// written into an otherwise-zero grid, patches containing no pilot are
/// masked, the model reconstructs them, and pilot positions are finally
/// overwritten with their LS values (the model never overrides a measurement).
/// When ground truth is supplied the NMSE is reported; otherwise it stays NaN.
inline EstimationResult model_estimate(const mae::ModelState &m, const PilotColumns &y,
                                       const PilotPattern &p, double snr_db,
                                       const synth::ChannelMatrix *h_true = nullptr) {
    const mae::ModelConfig &cfg = m.config;
    const PilotColumns ls = ls_pilot_estimate(y, p);
    const synth::ChannelMatrix partial =
        detail::pilot_partial_grid(ls, cfg.grid_rows, cfg.grid_cols);
    const auto visible = detail::pilot_token_visibility(cfg, ls.columns);
    EstimationResult r;
    r.h_hat = mae::reconstruct(m, partial, visible);
    for (std::uint32_t j = 0; j < ls.columns.size(); ++j)
        for (std::uint32_t mm = 0; mm < cfg.grid_rows; ++mm)
            r.h_hat.at(mm, ls.columns[j]) = ls.values.at(mm, j);
    r.method = "model";
    r.snr_db = snr_db;
    if (h_true != nullptr)
        r.nmse_db = nmse_db(r.h_hat, *h_true);
    return r;
}

// ---------------------------------------------------------------------------
// SNR sweep (classical baseline)
// ---------------------------------------------------------------------------

struct SweepPoint {
    double snr_db = 0.0;
    std::string method;
    double mean_nmse_db = 0.0;
    double std_nmse_db = 0.0;
    std::uint32_t n_channels = 0;
};

namespace detail {

inline SweepPoint summarize(double snr, std::string method, const std::vector<double> &vals) {
    SweepPoint pt;
    pt.snr_db = snr;
    pt.method = std::move(method);
    pt.n_channels = std::uint32_t(vals.size());
    double mean = 0.0;
    for (const auto v : vals)
        mean += v;
    mean /= double(vals.size());
    double var = 0.0;
    for (const auto v : vals)
        var += (v - mean) * (v - mean);
    pt.mean_nmse_db = mean;
    pt.std_nmse_db = vals.size() > 1 ? std::sqrt(var / double(vals.size() - 1)) : 0.0;
    return pt;
}

} // namespace detail

/// Monte-Carlo NMSE of the classical LS + linear-interpolation estimator over
/// an SNR grid.  Per channel i and SNR point s the noise seed is
/// hash_seed(seed, s, i), so the sweep is reproducible and channels are
/// independent across SNR points.  Statistics (mean, sample std) are taken
/// over the per-channel NMSE values in dB.
inline std::vector<SweepPoint> sweep_ls_interp(const synth::ChannelDataset &ds,
                                               const PilotPattern &p,
                                               const std::vector<double> &snr_grid,
                                               std::uint32_t n_channels, std::uint64_t seed) {
    require(!ds.samples.empty(), ErrorCode::invalid_argument, "empty dataset");
    require(!snr_grid.empty(), ErrorCode::invalid_argument, "empty SNR grid");
    require(n_channels >= 1, ErrorCode::invalid_argument, "n_channels must be >= 1");
    std::vector<SweepPoint> out;
    for (std::size_t s = 0; s < snr_grid.size(); ++s) {
        std::vector<double> vals(n_channels);
        for (std::uint32_t i = 0; i < n_channels; ++i) {
            const synth::ChannelMatrix &h = ds.samples[i % ds.samples.size()];
            const PilotColumns y =
                receive_pilots(h, p, snr_grid[s], hash_seed(seed, std::uint64_t(s), i));
            const synth::ChannelMatrix h_hat =
                interpolate_linear(ls_pilot_estimate(y, p), h.n_subcarriers);
            vals[i] = nmse_db(h_hat, h);
        }
        out.push_back(detail::summarize(snr_grid[s], "ls_interp", vals));
    }
    return out;
}

} // namespace wch::est

#endif
