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

#ifndef WCH_TTT_HPP
#define WCH_TTT_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wch/channel.hpp"
#include "wch/errors.hpp"
#include "wch/estimation.hpp"
#include "wch/mae.hpp"
#include "wch/tensor.hpp"

namespace wch::ttt {

// ---------------------------------------------------------------------------
// Configuration and trace
// ---------------------------------------------------------------------------

enum class ResetPolicy { on_scenario_change, never };

/// Pilot-aided test-time training: a handful of Adam steps on the decoder
/// only, driven by the reconstruction error at pilot positions.
struct TttConfig {
    std::uint32_t n_steps = 20;
    double lr = 1e-2;
    est::PilotPattern pattern;
    ResetPolicy reset_policy = ResetPolicy::on_scenario_change;
};

inline void validate(const TttConfig &c) {
    require(c.n_steps <= 1000, ErrorCode::invalid_argument, "n_steps must be <= 1000");
    require(c.lr > 0.0, ErrorCode::invalid_argument, "lr must be positive");
}

/// Adaptation record.  pilot_loss[s] is the cross-pilot objective after s
/// decoder updates (entry 0 is the static model); full_nmse_db mirrors it when
/// ground truth was supplied.  On divergence the last non-finite update is
/// rolled back, the trace is truncated to the finite prefix, and `diverged`
/// is set with a note instead of throwing, so the last finite state is
/// always returned.
struct TttTrace {
    std::vector<double> pilot_loss;
    std::vector<double> full_nmse_db;
    std::uint32_t steps_taken = 0;
    double adapt_gflops = 0.0;
    bool diverged = false;
    std::string note;
};

struct AdaptResult {
    mae::ModelState model;
    TttTrace trace;
};

// ---------------------------------------------------------------------------
// Cross-pilot objective
// ---------------------------------------------------------------------------

namespace detail {

/// Pre-processed observation: LS-seeded token grid plus the two directional
/// mask splits of the cross-pilot objective.  Pilot-carrying patches are
/// split into alternating halves; each direction hides one half (together
/// with every pilot-free patch) and scores the decoder's predictions at the
/// hidden half's pilot entries against their LS values.  Ground truth never
/// enters: the targets are the pilots themselves.
struct PreparedObservation {
    nn::Tensor tokens;                         // LS values at pilots, zero elsewhere
    std::vector<mae::MaskSplit> splits;        // one per direction
    std::vector<nn::Tensor> loss_masks;        // 1.0 at scored pilot entries
};

inline mae::MaskSplit split_from_flags(const std::vector<std::uint8_t> &visible) {
    mae::MaskSplit s;
    s.row_source.assign(visible.size(), -1);
    for (std::size_t t = 0; t < visible.size(); ++t) {
        if (visible[t]) {
            s.row_source[t] = std::int32_t(s.visible.size());
            s.visible.push_back(std::uint32_t(t));
        } else {
            s.masked.push_back(std::uint32_t(t));
        }
    }
    return s;
}

inline PreparedObservation prepare_observation(const mae::ModelConfig &cfg,
                                               const est::PilotColumns &ls) {
    PreparedObservation prep;
    const synth::ChannelMatrix partial =
        est::detail::pilot_partial_grid(ls, cfg.grid_rows, cfg.grid_cols);
    prep.tokens = mae::patchify(partial, cfg);

    // Tokens whose column span holds at least one pilot, in grid order.
    const auto pilot_visible = est::detail::pilot_token_visibility(cfg, ls.columns);
    std::vector<std::uint32_t> pilot_tokens;
    for (std::uint32_t t = 0; t < pilot_visible.size(); ++t)
        if (pilot_visible[t])
            pilot_tokens.push_back(t);
    require(pilot_tokens.size() >= 2, ErrorCode::invalid_argument,
            "cross-pilot adaptation needs pilots in at least two patches");

    // Pilot entry positions inside each patch column, as token-feature indices.
    const std::uint32_t patches_per_row = cfg.grid_cols / cfg.patch_cols;
    const std::uint32_t half = cfg.patch_rows * cfg.patch_cols;
    std::vector<std::vector<std::uint32_t>> features_per_patch_col(patches_per_row);
    for (const auto k : ls.columns) {
        const std::uint32_t pc = k / cfg.patch_cols, j = k % cfg.patch_cols;
        for (std::uint32_t i = 0; i < cfg.patch_rows; ++i) {
            features_per_patch_col[pc].push_back(i * cfg.patch_cols + j);
            features_per_patch_col[pc].push_back(half + i * cfg.patch_cols + j);
        }
    }

    for (int dir = 0; dir < 2; ++dir) {
        std::vector<std::uint8_t> visible(prep.tokens.rows, 0);
        nn::Tensor w(prep.tokens.rows, prep.tokens.cols);
        for (std::size_t q = 0; q < pilot_tokens.size(); ++q) {
            const std::uint32_t t = pilot_tokens[q];
            if (int(q % 2) == dir) {
                visible[t] = 1; // this half feeds the encoder
            } else {
                const std::uint32_t pc = t % patches_per_row;
                for (const auto f : features_per_patch_col[pc])
                    w.at(t, f) = 1.0; // score the hidden half's pilot entries
            }
        }
        prep.splits.push_back(split_from_flags(visible));
        prep.loss_masks.push_back(std::move(w));
    }
    return prep;

}

/// Mean cross-pilot loss over the batch; when `grad` is set, also
/// accumulates d(mean loss)/d(params) into the parameter gradients.
inline double batch_loss(const mae::ModelState &m,
                         const std::vector<PreparedObservation> &batch, bool grad) {
    const double scale = 1.0 / double(batch.front().splits.size() * batch.size());
    double acc = 0.0;
    for (const auto &obs : batch) {
        const nn::Var target = nn::constant(obs.tokens);
        for (std::size_t dir = 0; dir < obs.splits.size(); ++dir) {
            const nn::Var pred = mae::detail::forward_predictions(m, obs.tokens,
                                                                  obs.splits[dir]);
            const nn::Var loss =
                nn::mse(pred, target, nn::constant(obs.loss_masks[dir]));
            acc += loss->value.at(0, 0);
            if (grad)
                nn::backward(nn::scale(loss, scale));
        }
    }
    return acc * scale;
}

inline double mean_full_nmse(const mae::ModelState &m,
                             const std::vector<est::PilotColumns> &observations,
                             const est::PilotPattern &pattern,
                             const std::vector<synth::ChannelMatrix> &truth) {
    double acc = 0.0;
    for (std::size_t i = 0; i < observations.size(); ++i)
        acc += est::model_estimate(m, observations[i], pattern, 0.0, &truth[i]).nmse_db;
    return acc / double(observations.size());
}

inline std::vector<nn::Tensor> snapshot_group(const nn::ParamGroup &g) {
    std::vector<nn::Tensor> vals;
    vals.reserve(g.tensors.size());
    for (const auto &t : g.tensors)
        vals.push_back(t->value);
    return vals;
}

inline void restore_group(nn::ParamGroup &g, const std::vector<nn::Tensor> &vals) {
    for (std::size_t i = 0; i < g.tensors.size(); ++i)
        g.tensors[i]->value = vals[i];
}

} // namespace detail

// ---------------------------------------------------------------------------
// Adaptation
// ---------------------------------------------------------------------------

/// Adapts the decoder of a pre-trained model to a batch of pilot observations.
/// The encoder is frozen before the first step and is bit-identical on
/// return; only decoder parameters move.  Full-batch Adam with fresh
/// optimizer state; the loss is the cross-pilot reconstruction error (LS
/// pilot values as targets), so no ground truth influences the parameters.
/// `ground_truth`, when given (one matrix per observation), is used solely to
/// record the per-step full-grid NMSE in the trace.
inline AdaptResult ttt_adapt(const mae::ModelState &model,
                             const std::vector<est::PilotColumns> &observations,
                             const TttConfig &cfg,
                             const std::vector<synth::ChannelMatrix> *ground_truth = nullptr) {
    validate(cfg);
    require(!observations.empty(), ErrorCode::invalid_argument,
            "ttt_adapt needs at least one pilot observation");
    if (ground_truth != nullptr)
        require(ground_truth->size() == observations.size(), ErrorCode::invalid_argument,
                "ground truth count does not match the observation count");

    AdaptResult r{mae::clone_model(model), {}};
    mae::ModelState &m = r.model;
    m.encoder.set_trainable(false);
    m.decoder.set_trainable(true);

    std::vector<detail::PreparedObservation> batch;
    batch.reserve(observations.size());
    for (const auto &y : observations)
        batch.push_back(detail::prepare_observation(m.config, est::ls_pilot_estimate(y, cfg.pattern)));

    const auto record_nmse = [&] {
        if (ground_truth != nullptr)
            r.trace.full_nmse_db.push_back(
                detail::mean_full_nmse(m, observations, cfg.pattern, *ground_truth));
    };

    double loss = detail::batch_loss(m, batch, /*grad=*/false);
    r.trace.pilot_loss.push_back(loss);
    record_nmse();
    if (!std::isfinite(loss)) {
        r.trace.diverged = true;
        r.trace.note = "non-finite pilot loss before the first step";
        return r;
    }
    const double blowup = 1e3 * std::max(loss, 1e-12);

    std::vector<nn::ParamGroup *> groups{&m.encoder, &m.decoder};
    nn::AdamState opt;
    opt.lr = cfg.lr;
    for (std::uint32_t s = 1; s <= cfg.n_steps; ++s) {
        nn::zero_grad(groups);
        detail::batch_loss(m, batch, /*grad=*/true);
        const auto snapshot = detail::snapshot_group(m.decoder);
        nn::adam_step(groups, opt);
        loss = detail::batch_loss(m, batch, /*grad=*/false);
        if (!std::isfinite(loss) || loss > blowup) {
            detail::restore_group(m.decoder, snapshot);
            r.trace.diverged = true;
            r.trace.note = "adaptation diverged at step " + std::to_string(s) +
                           "; rolled back to the last finite state";
            break;
        }
        r.trace.pilot_loss.push_back(loss);
        record_nmse();
        r.trace.steps_taken = s;
    }

    r.trace.adapt_gflops =
        double(r.trace.steps_taken) * mae::flops_estimate(m.config, mae::FlopsMode::ttt_step);
    return r;
}

// ---------------------------------------------------------------------------
// Decoder reset
// ---------------------------------------------------------------------------

/// Restores decoder parameters bit-exactly from a pristine reference model
/// (the pre-trained checkpoint); the encoder is left untouched.  Returns a
/// fresh model, so no optimizer state can survive the reset.
inline mae::ModelState reset_decoder(const mae::ModelState &model,
                                     const mae::ModelState &reference) {
    require(nlohmann::json(model.config) == nlohmann::json(reference.config),
            ErrorCode::invalid_argument,
            "reset_decoder: model and checkpoint configurations differ");
    mae::ModelState out = mae::clone_model(model);
    for (std::size_t i = 0; i < out.decoder.tensors.size(); ++i)
        out.decoder.tensors[i]->value = reference.decoder.tensors[i]->value;
    out.decoder.set_trainable(reference.decoder.trainable);
    return out;
}

// ---------------------------------------------------------------------------
// Cross-scenario transfer experiment
// ---------------------------------------------------------------------------

/// Outcome of adapting a scenario-A model to scenario-B pilots.
/// reference_nmse_db is the static model's NMSE on its home scenario A;
/// static/adapted NMSE are both measured on the same scenario-B channels the
/// adaptation observed (test-time training: the test window is the training
/// window, via pilots only).
struct TransferReport {
    double reference_nmse_db = 0.0;
    double static_nmse_db = 0.0;
    double adapted_nmse_db = 0.0;
    double gain_db = 0.0;
    double snr_db = 0.0;
    std::uint32_t n_obs = 0;
    TttTrace trace;
};

inline TransferReport transfer_experiment(const mae::ModelState &model,
                                          const synth::ChannelDataset &scenario_a,
                                          const synth::ChannelDataset &scenario_b,
                                          const TttConfig &cfg, double snr_db,
                                          std::uint32_t n_obs, std::uint64_t seed) {
    validate(cfg);
    require(n_obs >= 1, ErrorCode::invalid_argument, "n_obs must be >= 1");
    require(scenario_a.samples.size() >= n_obs && scenario_b.samples.size() >= n_obs,
            ErrorCode::invalid_argument, "datasets are smaller than the evaluation window");

    TransferReport rep;
    rep.snr_db = snr_db;
    rep.n_obs = n_obs;

    std::vector<est::PilotColumns> obs_b;
    std::vector<synth::ChannelMatrix> truth_b;
    double ref_acc = 0.0;
    for (std::uint32_t i = 0; i < n_obs; ++i) {
        const auto &ha = scenario_a.samples[i];
        const auto ya = est::receive_pilots(ha, cfg.pattern, snr_db, hash_seed(seed, 0, i));
        ref_acc += est::model_estimate(model, ya, cfg.pattern, snr_db, &ha).nmse_db;
        truth_b.push_back(scenario_b.samples[i]);
        obs_b.push_back(est::receive_pilots(truth_b.back(), cfg.pattern, snr_db,
                                            hash_seed(seed, 1, i)));
    }
    rep.reference_nmse_db = ref_acc / double(n_obs);
    rep.static_nmse_db = detail::mean_full_nmse(model, obs_b, cfg.pattern, truth_b);

    AdaptResult adapted = ttt_adapt(model, obs_b, cfg, &truth_b);
    rep.adapted_nmse_db = detail::mean_full_nmse(adapted.model, obs_b, cfg.pattern, truth_b);
    rep.gain_db = rep.static_nmse_db - rep.adapted_nmse_db;
    rep.trace = std::move(adapted.trace);
    return rep;
}

} // namespace wch::ttt

#endif
