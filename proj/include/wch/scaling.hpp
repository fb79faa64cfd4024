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

#ifndef WCH_SCALING_HPP
#define WCH_SCALING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wch/channel.hpp"
#include "wch/errors.hpp"
#include "wch/mae.hpp"
#include "wch/manifold.hpp"

namespace wch::scaling {

// ---------------------------------------------------------------------------
// Power-law fit
// ---------------------------------------------------------------------------

struct ScalePoint {
    std::uint64_t params = 0;
    double loss = 0.0;
    double loss_db = 0.0; // 10*log10(loss)
};

/// Least-squares fit of loss = c * params^-alpha on log-log axes.
/// log_c is the natural-log intercept; saturation_at is filled by
/// detect_saturation when an experiment runs both.
struct ScalingFit {
    double alpha = 0.0;
    double log_c = 0.0;
    double r_squared = 0.0;
    std::vector<ScalePoint> per_scale; // ascending by params
    std::optional<std::uint64_t> saturation_at;
};

namespace detail {

inline std::vector<ScalePoint>
checked_points(std::vector<std::pair<std::uint64_t, double>> pts) {
    require(pts.size() >= 3, ErrorCode::invalid_argument,
            "a scaling fit needs at least 3 (params, loss) points");
    std::sort(pts.begin(), pts.end());
    std::vector<ScalePoint> out;
    out.reserve(pts.size());
    for (const auto &[p, l] : pts) {
        require(p >= 1, ErrorCode::invalid_argument, "param counts must be positive");
        require(l > 0.0 && std::isfinite(l), ErrorCode::invalid_argument,
                "losses must be positive and finite");
        out.push_back({p, l, 10.0 * std::log10(l)});
    }
    for (std::size_t i = 1; i < out.size(); ++i)
        require(out[i].params > out[i - 1].params, ErrorCode::invalid_argument,
                "duplicate parameter counts in the ladder");
    return out;
}

/// snprintf-based formatting keeps report text independent of locales.
inline std::string fmt_g(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

} // namespace detail

inline ScalingFit fit_power_law(const std::vector<std::pair<std::uint64_t, double>> &points) {
    ScalingFit fit;
    fit.per_scale = detail::checked_points(points);

    const double n = double(fit.per_scale.size());
    double mx = 0.0, my = 0.0;
    for (const auto &p : fit.per_scale) {
        mx += std::log(double(p.params)) / n;
        my += std::log(p.loss) / n;
    }
    double sxx = 0.0, sxy = 0.0;
    for (const auto &p : fit.per_scale) {
        const double dx = std::log(double(p.params)) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(p.loss) - my);
    }
    const double slope = sxy / sxx;
    fit.alpha = -slope;
    fit.log_c = my - slope * mx;

    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto &p : fit.per_scale) {
        const double y = std::log(p.loss);
        const double y_hat = fit.log_c + slope * std::log(double(p.params));
        ss_res += (y - y_hat) * (y - y_hat);
        ss_tot += (y - my) * (y - my);
    }
    fit.r_squared = ss_tot == 0.0 ? (ss_res == 0.0 ? 1.0 : 0.0) : 1.0 - ss_res / ss_tot;
    return fit;
}

// ---------------------------------------------------------------------------
// Saturation detection
// ---------------------------------------------------------------------------

/// Smallest parameter count from which the dB gain per parameter doubling
/// (adjacent-pair gain divided by log2 of the parameter ratio) stays below
/// `gain_threshold_db` for every remaining pair; nullopt when the ladder is
/// still earning more than the threshold at its largest scales.
inline std::optional<std::uint64_t>
detect_saturation(const std::vector<std::pair<std::uint64_t, double>> &points,
                  double gain_threshold_db = 0.6) {
    require(std::isfinite(gain_threshold_db) && gain_threshold_db > 0.0,
            ErrorCode::invalid_argument, "gain threshold must be positive");
    const auto pts = detail::checked_points(points);

    // walk backwards while the per-doubling gain stays below the threshold
    std::size_t first_below = pts.size() - 1;
    while (first_below > 0) {
        const auto &a = pts[first_below - 1];
        const auto &b = pts[first_below];
        const double doublings = std::log2(double(b.params) / double(a.params));
        const double gain_per_doubling = (a.loss_db - b.loss_db) / doublings;
        if (gain_per_doubling >= gain_threshold_db)
            break;
        --first_below;
    }
    if (first_below == pts.size() - 1)
        return std::nullopt; // even the last doubling still pays
    return pts[first_below].params;
}

// ---------------------------------------------------------------------------
// Sizing advice
// ---------------------------------------------------------------------------

enum class Strategy { classical, small_ttt, medium_ttt, large_if_data_rich };

inline const char *to_string(Strategy s) {
    switch (s) {
    case Strategy::classical:
        return "classical";
    case Strategy::small_ttt:
        return "small+TTT";
    case Strategy::medium_ttt:
        return "medium+TTT";
    case Strategy::large_if_data_rich:
        return "large-if-data-rich";
    }
    return "unknown";
}

struct SizingAdvice {
    double d_nl = 0.0;
    double rho = 0.0;
    std::string rho_label;
    std::uint64_t params_low = 0;
    std::uint64_t params_high = 0;
    Strategy strategy = Strategy::classical;
    std::string rationale;
};

/// Sizing recipe driven by the non-linear intrinsic dimension and the
/// collapse-risk indicator rho = n_samples / 2^d_nl.  Band edges are closed
/// on the left.  Below d_nl = 10 a learned model is not recommended at all;
/// the quoted range is the ceiling to respect if one is deployed anyway.
inline SizingAdvice recommend_size(double d_nl, std::uint64_t n_samples) {
    require(std::isfinite(d_nl) && d_nl > 0.0, ErrorCode::invalid_argument,
            "d_nl must be positive and finite");
    const auto risk = manifold::collapse_risk(n_samples, d_nl);

    SizingAdvice adv;
    adv.d_nl = d_nl;
    adv.rho = risk.rho;
    adv.rho_label = risk.label;

    const std::string rho_text = "rho = n/2^d_NL ~= " + detail::fmt_g(risk.rho) + " (" +
                                 risk.label + ") for " + std::to_string(n_samples) +
                                 " samples";
    if (d_nl < 10.0) {
        adv.strategy = Strategy::classical;
        adv.params_low = 10'000'000;
        adv.params_high = 15'000'000;
        adv.rationale = "d_NL = " + detail::fmt_g(d_nl) +
                        " < 10: the manifold is nearly linear, so classical LMMSE with a "
                        "single covariance suffices and a foundation model is not "
                        "recommended; if a learned estimator is deployed anyway, stay at "
                        "or below the quoted small range. " +
                        rho_text + ".";
    } else if (d_nl < 15.0) {
        adv.strategy = Strategy::small_ttt;
        adv.params_low = 10'000'000;
        adv.params_high = 15'000'000;
        adv.rationale = "d_NL = " + detail::fmt_g(d_nl) +
                        " in [10, 15): a small model covers the manifold; pair it with "
                        "test-time training for scenario drift. " +
                        rho_text + ".";
    } else if (d_nl < 25.0) {
        adv.strategy = Strategy::medium_ttt;
        adv.params_low = 15'000'000;
        adv.params_high = 50'000'000;
        adv.rationale = "d_NL = " + detail::fmt_g(d_nl) +
                        " in [15, 25): a medium model with test-time training tracks the "
                        "extra curvature. " +
                        rho_text + ".";
    } else if (risk.rho > 10.0) {
        adv.strategy = Strategy::large_if_data_rich;
        adv.params_low = 30'000'000;
        adv.params_high = 100'000'000;
        adv.rationale = "d_NL = " + detail::fmt_g(d_nl) +
                        " >= 25 with healthy sample coverage: a large model is justified "
                        "by the data. " +
                        rho_text + ".";
    } else {
        adv.strategy = Strategy::small_ttt;
        adv.params_low = 10'000'000;
        adv.params_high = 15'000'000;
        adv.rationale = "d_NL = " + detail::fmt_g(d_nl) +
                        " >= 25 but the sample budget cannot cover the manifold "
                        "(collapse risk): keep the model small (<= 15M) and lean on "
                        "test-time training instead of scale. " +
                        rho_text + ".";
    }
    return adv;
}

inline void to_json(nlohmann::json &j, const SizingAdvice &a) {
    j = nlohmann::json{{"d_nl", a.d_nl},
                       {"rho", a.rho},
                       {"rho_label", a.rho_label},
                       {"recommended_params_low", a.params_low},
                       {"recommended_params_high", a.params_high},
                       {"strategy", to_string(a.strategy)},
                       {"rationale", a.rationale}};
}

// ---------------------------------------------------------------------------
// Ladder experiment
// ---------------------------------------------------------------------------

struct TrainBudget {
    std::uint64_t steps = 500;
    std::uint32_t batch_size = 8;
    double lr = 3e-3;
};

struct ScaleOutcome {
    mae::ModelConfig config;
    std::uint64_t params = 0;
    double final_loss = 0.0; // NaN when failed
    bool failed = false;
    std::string error;
    mae::ModelState model; // trained checkpoint, empty when failed
};

struct ExperimentReport {
    ScalingFit fit;                  // over the successful scales
    std::vector<ScaleOutcome> scales; // all scales, ascending by params
    manifold::DimReport profile;      // dimensionality of the training data
    std::string csv;                  // plot-ready "params,loss,loss_db"
    nlohmann::json summary;
};

namespace detail {

/// Mean masked-channel-modeling loss over a sample range with per-sample
/// deterministic mask seeds.
inline double eval_loss(const mae::ModelState &m, const synth::ChannelDataset &ds,
                        std::size_t lo, std::size_t hi, std::uint64_t seed) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
        acc += mae::mcm_loss(m, ds.samples[i], hash_seed(seed, 0xE7A1, i));
    return acc / double(hi - lo);
}

} // namespace detail

/// Trains every ladder config on the same data and step budget, scores each
/// on a held-out tail of the dataset (last 20%, at least 4 samples), fits
/// the power law over the scales that finished, and runs saturation
/// detection.  A scale that throws is recorded as failed and excluded from
/// the fit; the remaining scales still run.  Deterministic in `seed`.
inline ExperimentReport run_scaling_experiment(const synth::ChannelDataset &ds,
                                               const std::vector<mae::ModelConfig> &ladder,
                                               const TrainBudget &budget,
                                               std::uint64_t seed) {
    require(!ladder.empty(), ErrorCode::invalid_argument, "empty ladder");
    require(ds.samples.size() >= 8, ErrorCode::invalid_argument,
            "scaling experiment needs at least 8 samples");

    ExperimentReport rep;
    std::string profile_note;
    try {
        rep.profile = manifold::profile(ds);
    } catch (const Error &e) {
        profile_note = std::string("dataset profile unavailable: ") + e.what();
    }

    const std::size_t n = ds.samples.size();
    const std::size_t n_eval = std::max<std::size_t>(4, n / 5);
    const std::size_t n_train = n - n_eval;
    synth::ChannelDataset train = ds;
    train.samples.assign(ds.samples.begin(),
                         ds.samples.begin() + std::ptrdiff_t(n_train));

    for (std::size_t i = 0; i < ladder.size(); ++i) {
        ScaleOutcome out;
        out.config = ladder[i];
        out.params = mae::config_param_count(ladder[i]);
        out.final_loss = std::numeric_limits<double>::quiet_NaN();
        try {
            mae::ModelState m = mae::init_model(ladder[i], hash_seed(seed, 0x5CA1E, i));
            mae::pretrain(m, train, budget.steps, budget.batch_size, budget.lr,
                          hash_seed(seed, 0x7EA1, i));
            out.final_loss = detail::eval_loss(m, ds, n_train, n, seed);
            out.model = std::move(m);
        } catch (const Error &e) {
            out.failed = true;
            out.error = e.what();
        }
        rep.scales.push_back(std::move(out));
    }
    std::sort(rep.scales.begin(), rep.scales.end(),
              [](const ScaleOutcome &a, const ScaleOutcome &b) { return a.params < b.params; });

    std::vector<std::pair<std::uint64_t, double>> pts;
    for (const auto &s : rep.scales)
        if (!s.failed)
            pts.emplace_back(s.params, s.final_loss);

    std::string note;
    if (pts.size() >= 3) {
        rep.fit = fit_power_law(pts);
        rep.fit.saturation_at = detect_saturation(pts);
    } else {
        note = "too few successful scales for a power-law fit";
    }

    rep.csv = "params,loss,loss_db\n";
    char row[96];
    for (const auto &p : rep.fit.per_scale) {
        std::snprintf(row, sizeof row, "%llu,%.17g,%.17g\n",
                      static_cast<unsigned long long>(p.params), p.loss, p.loss_db);
        rep.csv += row;
    }

    nlohmann::json scales_json = nlohmann::json::array();
    for (const auto &s : rep.scales) {
        nlohmann::json js{{"params", s.params},
                          {"embed_dim", s.config.embed_dim},
                          {"encoder_depth", s.config.encoder_depth},
                          {"decoder_embed_dim", s.config.decoder_embed_dim},
                          {"failed", s.failed}};
        if (s.failed)
            js["error"] = s.error;
        else {
            js["loss"] = s.final_loss;
            js["loss_db"] = 10.0 * std::log10(s.final_loss);
        }
        scales_json.push_back(std::move(js));
    }
    rep.summary = nlohmann::json{
        {"seed", seed},
        {"budget",
         {{"steps", budget.steps}, {"batch_size", budget.batch_size}, {"lr", budget.lr}}},
        {"dataset",
         {{"n_samples", n},
          {"n_train", n_train},
          {"n_eval", n_eval},
          {"d_twonn", rep.profile.d_twonn},
          {"d_mle", rep.profile.d_mle},
          {"rho", rep.profile.rho},
          {"regime", manifold::label_for_rho(rep.profile.rho)}}},
        {"fit",
         {{"alpha", rep.fit.alpha},
          {"log_c", rep.fit.log_c},
          {"r_squared", rep.fit.r_squared},
          {"saturation_at", rep.fit.saturation_at ? nlohmann::json(*rep.fit.saturation_at)
                                                  : nlohmann::json(nullptr)}}},
    };
    std::string notes = note;
    if (!profile_note.empty())
        notes += (notes.empty() ? "" : "; ") + profile_note;
    if (!notes.empty())
        rep.summary["notes"] = notes;
    return rep;
}

} // namespace wch::scaling

#endif
