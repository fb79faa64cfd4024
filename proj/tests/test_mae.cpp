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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "wch/mae.hpp"

using namespace wch;
using namespace wch::mae;

namespace {

/// Config for a 32x16 grid: T=32 tokens of dim 32; decoder share 12.05%.
ModelConfig small_config() {
    ModelConfig c;
    c.grid_rows = 32;
    c.grid_cols = 16;
    c.embed_dim = 16;
    c.n_heads = 2;
    c.encoder_depth = 2;
    c.decoder_embed_dim = 6;
    c.decoder_depth = 1;
    return c;
}

/// Config for a 16x8 grid: T=8 tokens; decoder share 13.83%.
ModelConfig tiny_config() {
    ModelConfig c;
    c.grid_rows = 16;
    c.grid_cols = 8;
    c.embed_dim = 8;
    c.n_heads = 1;
    c.encoder_depth = 2;
    c.decoder_embed_dim = 3;
    c.decoder_depth = 1;
    return c;
}

synth::ScenarioConfig small_scenario(std::uint64_t seed) {
    synth::ScenarioConfig s;
    s.n_antennas = 32;
    s.n_subcarriers = 16;
    s.seed = seed;
    return s;
}

double nmse(const synth::ChannelMatrix &est, const synth::ChannelMatrix &truth) {
    double err = 0.0, sig = 0.0;
    for (std::size_t i = 0; i < truth.h.size(); ++i) {
        const auto d = std::complex<double>(est.h[i]) - std::complex<double>(truth.h[i]);
        err += std::norm(d);
        sig += std::norm(std::complex<double>(truth.h[i]));
    }
    return err / sig;
}

bool groups_equal(const ModelState &a, const ModelState &b) {
    for (std::size_t i = 0; i < a.encoder.tensors.size(); ++i)
        if (a.encoder.tensors[i]->value.v != b.encoder.tensors[i]->value.v)
            return false;
    for (std::size_t i = 0; i < a.decoder.tensors.size(); ++i)
        if (a.decoder.tensors[i]->value.v != b.decoder.tensors[i]->value.v)
            return false;
    return true;
}

} // namespace

TEST_CASE("patchify splits row-major with [re; im] layout", "[mae]") {
    SECTION("4x4 matrix with 2x2 patches gives 4 tokens of length 8") {
        ModelConfig c;
        c.grid_rows = 4;
        c.grid_cols = 4;
        c.patch_rows = 2;
        c.patch_cols = 2;
        synth::ChannelMatrix h(4, 4);
        for (std::uint32_t r = 0; r < 4; ++r)
            for (std::uint32_t k = 0; k < 4; ++k)
                h.at(r, k) = {float(10 * r + k), -float(10 * r + k)};

        const nn::Tensor tok = patchify(h, c);
        REQUIRE(tok.rows == 4);
        REQUIRE(tok.cols == 8);
        // token 1 covers rows 0..1, cols 2..3 in row-major patch order
        REQUIRE(tok.at(1, 0) == 2.0);
        REQUIRE(tok.at(1, 1) == 3.0);
        REQUIRE(tok.at(1, 2) == 12.0);
        REQUIRE(tok.at(1, 3) == 13.0);
        REQUIRE(tok.at(1, 4) == -2.0);  // imaginary half
        REQUIRE(tok.at(1, 7) == -13.0);
        // token 2 covers rows 2..3, cols 0..1
        REQUIRE(tok.at(2, 0) == 20.0);
        REQUIRE(tok.at(2, 3) == 31.0);
    }

    SECTION("roundtrip on a random 128x76 grid with 4x19 patches is bit-identical") {
        ModelConfig c;
        c.patch_rows = 4;
        c.patch_cols = 19;
        synth::ChannelMatrix h(128, 76);
        CounterRng rng(11);
        for (auto &z : h.h)
            z = {float(rng.next_gaussian()), float(rng.next_gaussian())};
        const synth::ChannelMatrix back = unpatchify(patchify(h, c), c);
        REQUIRE(back.h == h.h);
    }

    SECTION("indivisible patch shape is rejected") {
        ModelConfig c; // 8x8 patches cannot tile 76 columns
        c.patch_rows = 8;
        c.patch_cols = 8;
        synth::ChannelMatrix h(128, 76);
        try {
            patchify(h, c);
            FAIL("expected invalid_shape");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_shape);
        }
    }

    SECTION("grid mismatch is rejected") {
        synth::ChannelMatrix h(16, 16);
        try {
            patchify(h, small_config());
            FAIL("expected invalid_shape");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_shape);
        }
    }
}

TEST_CASE("apply_mask picks floor(ratio*n) tokens deterministically", "[mae]") {
    SECTION("10 tokens at ratio 0.5 mask exactly 5") {
        const MaskSplit s = apply_mask(10, 0.5, 42);
        REQUIRE(s.masked.size() == 5);
        REQUIRE(s.visible.size() == 5);
        std::vector<bool> hit(10, false);
        for (const auto t : s.masked)
            hit[t] = true;
        for (const auto t : s.visible) {
            REQUIRE_FALSE(hit[t]); // disjoint
            hit[t] = true;
        }
        for (const auto b : hit)
            REQUIRE(b); // exhaustive
        for (std::size_t t = 0; t < 10; ++t)
            REQUIRE(s.row_source[t] == (hit[t] ? s.row_source[t] : -1));
        for (std::size_t r = 0; r < s.visible.size(); ++r)
            REQUIRE(s.row_source[s.visible[r]] == std::int32_t(r));
        for (const auto t : s.masked)
            REQUIRE(s.row_source[t] == -1);
    }

    SECTION("same seed reproduces the mask; another seed moves it") {
        const MaskSplit a = apply_mask(64, 0.5, 7);
        const MaskSplit b = apply_mask(64, 0.5, 7);
        const MaskSplit c = apply_mask(64, 0.5, 8);
        REQUIRE(a.masked == b.masked);
        REQUIRE(a.visible == b.visible);
        REQUIRE(a.masked != c.masked);
    }

    SECTION("degenerate ratios for tiny token counts are rejected") {
        try {
            apply_mask(10, 0.05, 1); // floor(0.5) = 0 masked
            FAIL("expected invalid_argument");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_argument);
        }
        try {
            apply_mask(1, 0.5, 1); // cannot keep 1 visible and 1 masked
            FAIL("expected invalid_argument");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_argument);
        }
        REQUIRE(apply_mask(10, 0.95, 1).masked.size() == 9); // still one visible
    }

    SECTION("token-matrix overload returns the visible rows plus the mask set") {
        nn::Tensor tok(6, 3);
        for (std::size_t i = 0; i < tok.size(); ++i)
            tok.v[i] = double(i);
        const auto [vis, masked] = apply_mask(tok, 0.5, 19);
        const MaskSplit s = apply_mask(6, 0.5, 19);
        REQUIRE(masked == s.masked);
        REQUIRE(vis.rows == s.visible.size());
        for (std::size_t r = 0; r < vis.rows; ++r)
            for (std::size_t j = 0; j < 3; ++j)
                REQUIRE(vis.at(r, j) == tok.at(s.visible[r], j));
    }
}

TEST_CASE("apply_mask is uniform across seeds", "[mae]") {
    const std::size_t n = 10, draws = 10000;
    std::vector<std::size_t> hits(n, 0);
    for (std::size_t seed = 0; seed < draws; ++seed)
        for (const auto t : apply_mask(n, 0.5, seed).masked)
            ++hits[t];
    for (const auto h : hits) {
        const double freq = double(h) / double(draws);
        REQUIRE(freq > 0.48);
        REQUIRE(freq < 0.52);
    }
}

TEST_CASE("parameter counts match the analytic formulas", "[mae]") {
    SECTION("default config: 608 tokens, 241088 + 35392 parameters") {
        const ModelConfig c;
        REQUIRE(c.n_tokens() == 608);
        REQUIRE(c.patch_dim() == 32);
        REQUIRE(encoder_param_count(c) == 241088);
        REQUIRE(decoder_param_count(c) == 35392);
        REQUIRE(config_param_count(c) == 276480);
        REQUIRE(decoder_fraction(c) == Catch::Approx(0.128).margin(0.001));
    }

    SECTION("instantiated models agree with the formulas") {
        for (const auto &cfg : {small_config(), tiny_config()}) {
            const ModelState m = init_model(cfg, 1);
            const auto counts = nn::param_count({&m.encoder, &m.decoder});
            REQUIRE(counts.per_group[0].second == encoder_param_count(cfg));
            REQUIRE(counts.per_group[1].second == decoder_param_count(cfg));
        }
        REQUIRE(encoder_param_count(small_config()) == 7632);
        REQUIRE(decoder_param_count(small_config()) == 1046);
        REQUIRE(encoder_param_count(tiny_config()) == 2088);
        REQUIRE(decoder_param_count(tiny_config()) == 335);
    }

    SECTION("config validation rejects bad layouts") {
        ModelConfig c = small_config();
        c.decoder_embed_dim = 16; // decoder share balloons past 14%
        try {
            validate_model_config(c);
            FAIL("expected infeasible_config");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::infeasible_config);
        }

        c = small_config();
        c.n_heads = 3; // does not divide embed_dim 16
        try {
            validate_model_config(c);
            FAIL("expected invalid_shape");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_shape);
        }

        c = small_config();
        c.patch_cols = 3; // does not divide 16 columns
        try {
            validate_model_config(c);
            FAIL("expected invalid_shape");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_shape);
        }

        c = small_config();
        c.mask_ratio = 1.0;
        try {
            validate_model_config(c);
            FAIL("expected invalid_argument");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_argument);
        }
    }
}

TEST_CASE("init_model is deterministic and group-structured", "[mae]") {
    const ModelState a = init_model(small_config(), 5);
    const ModelState b = init_model(small_config(), 5);
    const ModelState c = init_model(small_config(), 6);
    REQUIRE(groups_equal(a, b));
    REQUIRE_FALSE(groups_equal(a, c));
    REQUIRE(a.encoder.name == "encoder");
    REQUIRE(a.decoder.name == "decoder");
    REQUIRE(a.encoder.trainable);
    REQUIRE(a.decoder.trainable);
    REQUIRE(a.encoder_names.size() == a.encoder.tensors.size());
    REQUIRE(a.decoder_names.size() == a.decoder.tensors.size());

    const ModelState d = clone_model(a);
    REQUIRE(groups_equal(a, d));
    // the clone owns fresh leaves
    REQUIRE(a.encoder.tensors[0] != d.encoder.tensors[0]);
}

TEST_CASE("mcm_loss measures masked positions only", "[mae]") {
    const ModelConfig cfg = small_config();
    const ModelState m = init_model(cfg, 2);
    const synth::ChannelMatrix h = synth::synthesize_channel(small_scenario(1), 0);
    const nn::Tensor tokens = patchify(h, cfg);
    const MaskSplit split = apply_mask(tokens.rows, cfg.mask_ratio, 99);

    SECTION("an oracle decoder that outputs the truth scores exactly zero") {
        const auto lb =
            detail::mcm_loss_from_predictions(nn::constant(tokens), nn::constant(tokens), split);
        REQUIRE(lb.value == 0.0);
        REQUIRE(lb.signal > 0.0);
    }

    SECTION("perturbing a visible position's target leaves the loss unchanged") {
        const nn::Var pred = detail::forward_predictions(m, tokens, split);
        const auto base = detail::mcm_loss_from_predictions(pred, nn::constant(tokens), split);
        nn::Tensor poked = tokens;
        poked.at(split.visible[0], 3) += 123.0;
        const auto moved = detail::mcm_loss_from_predictions(pred, nn::constant(poked), split);
        REQUIRE(base.value == moved.value);

        nn::Tensor poked2 = tokens;
        poked2.at(split.masked[0], 3) += 123.0;
        const auto hit = detail::mcm_loss_from_predictions(pred, nn::constant(poked2), split);
        REQUIRE(hit.value != base.value);
    }

    SECTION("loss gradient w.r.t. visible-position targets is exactly zero") {
        const nn::Var pred = detail::forward_predictions(m, tokens, split);
        const nn::Var target = nn::leaf(tokens, true);
        const auto lb = detail::mcm_loss_from_predictions(pred, target, split);
        nn::backward(lb.loss);
        REQUIRE_FALSE(target->grad.empty());
        double masked_grad_mag = 0.0;
        for (const auto t : split.visible)
            for (std::size_t j = 0; j < tokens.cols; ++j)
                REQUIRE(target->grad.at(t, j) == 0.0);
        for (const auto t : split.masked)
            for (std::size_t j = 0; j < tokens.cols; ++j)
                masked_grad_mag += std::abs(target->grad.at(t, j));
        REQUIRE(masked_grad_mag > 0.0);
    }

    SECTION("an untrained model on unit-power channels lands near the signal power") {
        const auto ds = synth::synthesize_dataset(small_scenario(3), 8, "unit");
        double mean_loss = 0.0;
        for (std::size_t i = 0; i < ds.samples.size(); ++i)
            mean_loss += mcm_loss(m, ds.samples[i], 1000 + i);
        mean_loss /= double(ds.samples.size());
        REQUIRE(mean_loss > 0.5);
        REQUIRE(mean_loss < 2.0);
    }

    SECTION("loss_to_db references the masked signal power") {
        REQUIRE(loss_to_db(0.5, 0.5) == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(loss_to_db(0.05, 0.5) == Catch::Approx(-10.0).margin(1e-9));
        REQUIRE(std::isinf(loss_to_db(0.0, 0.5)));
        try {
            loss_to_db(0.1, 0.0);
            FAIL("expected invalid_argument");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_argument);
        }
    }
}

TEST_CASE("reconstruct passes visible patches through untouched", "[mae]") {
    const ModelConfig cfg = small_config();
    const ModelState m = init_model(cfg, 4);
    const synth::ChannelMatrix h = synth::synthesize_channel(small_scenario(2), 0);
    const nn::Tensor tokens = patchify(h, cfg);

    SECTION("all-visible input returns the input exactly") {
        const std::vector<std::uint8_t> vis(cfg.n_tokens(), 1);
        const synth::ChannelMatrix out = reconstruct(m, h, vis);
        REQUIRE(out.h == h.h);
    }

    SECTION("visible patches are bit-identical, masked patches change") {
        const MaskSplit split = apply_mask(tokens.rows, 0.5, 21);
        std::vector<std::uint8_t> vis(tokens.rows, 0);
        for (const auto t : split.visible)
            vis[t] = 1;
        const synth::ChannelMatrix out = reconstruct(m, h, vis);
        const nn::Tensor out_tok = patchify(out, cfg);
        double masked_delta = 0.0;
        for (std::size_t t = 0; t < tokens.rows; ++t)
            for (std::size_t j = 0; j < tokens.cols; ++j) {
                if (vis[t])
                    REQUIRE(out_tok.at(t, j) == Catch::Approx(tokens.at(t, j)).margin(1e-6));
                else
                    masked_delta += std::abs(out_tok.at(t, j) - tokens.at(t, j));
            }
        REQUIRE(masked_delta > 0.0); // untrained decoder does not match truth
    }

    SECTION("a perfect-oracle decoder reproduces the ground truth") {
        const MaskSplit split = apply_mask(tokens.rows, 0.5, 22);
        const nn::Tensor merged = detail::merge_predictions(tokens, split, tokens);
        const synth::ChannelMatrix out = unpatchify(merged, cfg);
        REQUIRE(out.h == h.h);
    }

    SECTION("all-masked input is rejected") {
        const std::vector<std::uint8_t> vis(cfg.n_tokens(), 0);
        try {
            reconstruct(m, h, vis);
            FAIL("expected invalid_argument");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_argument);
        }
    }

    SECTION("wrong-length visibility mask is rejected") {
        const std::vector<std::uint8_t> vis(cfg.n_tokens() + 1, 1);
        try {
            reconstruct(m, h, vis);
            FAIL("expected invalid_shape");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_shape);
        }
    }
}

TEST_CASE("pretrain logs every step and is deterministic", "[mae]") {
    synth::ScenarioConfig sc;
    sc.n_antennas = 16;
    sc.n_subcarriers = 8;
    sc.seed = 10;
    const auto ds = synth::synthesize_dataset(sc, 64, "tiny");
    const ModelConfig cfg = tiny_config();

    SECTION("training log covers steps 1..n with finite losses") {
        ModelState m = init_model(cfg, 7);
        pretrain(m, ds, 30, 4, 1e-3, 123);
        REQUIRE(m.training_log.size() == 30);
        for (std::size_t i = 0; i < 30; ++i) {
            REQUIRE(m.training_log[i].first == i + 1);
            REQUIRE(std::isfinite(m.training_log[i].second));
        }
    }

    SECTION("identical seeds give bit-identical parameters and logs") {
        ModelState a = init_model(cfg, 7);
        ModelState b = init_model(cfg, 7);
        pretrain(a, ds, 25, 4, 1e-3, 123);
        pretrain(b, ds, 25, 4, 1e-3, 123);
        REQUIRE(groups_equal(a, b));
        REQUIRE(a.training_log == b.training_log);

        ModelState c = init_model(cfg, 7);
        pretrain(c, ds, 25, 4, 1e-3, 124);
        REQUIRE_FALSE(groups_equal(a, c));
    }

    SECTION("invalid requests are rejected up front") {
        ModelState m = init_model(cfg, 7);
        try {
            pretrain(m, ds, 0, 4, 1e-3, 1);
            FAIL("expected invalid_argument");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_argument);
        }
        synth::ChannelDataset empty;
        try {
            pretrain(m, empty, 1, 4, 1e-3, 1);
            FAIL("expected invalid_argument");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_argument);
        }
    }

    SECTION("non-finite loss raises training_diverged with the step index") {
        ModelState m = init_model(cfg, 7);
        m.vars.patch_w->value.v[0] = std::numeric_limits<double>::quiet_NaN();
        try {
            pretrain(m, ds, 5, 2, 1e-3, 1);
            FAIL("expected training_diverged");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::training_diverged);
            REQUIRE(std::string(e.what()).find("step 1") != std::string::npos);
        }
    }
}

TEST_CASE("pretrain learns the synthetic channel family", "[mae][slow]") {
    // Desk setup sized so the decoder can actually transport token content:
    // per-subcarrier column tokens (16 antennas -> 32 values) with a decoder
    // width of 32. Smooth-frequency scenario keeps the task learnable in a
    // few hundred steps.
    synth::ScenarioConfig sc;
    sc.n_antennas = 16;
    sc.n_subcarriers = 16;
    sc.n_clusters = 2;
    sc.rays_per_cluster = 4;
    sc.rician_k_db = 10.0;
    sc.delay_spread = 10e-9;
    sc.seed = 50;
    const auto ds = synth::synthesize_dataset(sc, 2000, "desk");

    ModelConfig cfg;
    cfg.grid_rows = 16;
    cfg.grid_cols = 16;
    cfg.patch_rows = 16;
    cfg.patch_cols = 1;
    cfg.embed_dim = 64;
    cfg.n_heads = 8;
    cfg.encoder_depth = 2;
    cfg.decoder_embed_dim = 32;
    cfg.decoder_depth = 1;

    ModelState m = init_model(cfg, 9);
    pretrain(m, ds, 500, 8, 3e-3, 31);

    SECTION("500 steps cut the smoothed loss by more than half") {
        double head = 0.0, tail = 0.0;
        for (std::size_t i = 0; i < 20; ++i) {
            head += m.training_log[i].second;
            tail += m.training_log[m.training_log.size() - 1 - i].second;
        }
        INFO("initial " << head / 20.0 << ", final " << tail / 20.0);
        REQUIRE(tail / 20.0 < 0.5 * (head / 20.0));
    }

    SECTION("reconstruction beats zero-filling the masked patches by >= 3 dB") {
        synth::ScenarioConfig ec = sc;
        ec.seed = 777;
        const auto eval = synth::synthesize_dataset(ec, 20, "eval");
        double model_nmse = 0.0, zero_nmse = 0.0;
        for (std::size_t i = 0; i < eval.samples.size(); ++i) {
            const synth::ChannelMatrix &h = eval.samples[i];
            const nn::Tensor tokens = patchify(h, cfg);
            const MaskSplit split = apply_mask(tokens.rows, 0.5, 9000 + i);
            std::vector<std::uint8_t> vis(tokens.rows, 0);
            for (const auto t : split.visible)
                vis[t] = 1;
            model_nmse += nmse(reconstruct(m, h, vis), h);
            const nn::Tensor zeros(tokens.rows, tokens.cols);
            zero_nmse += nmse(unpatchify(detail::merge_predictions(tokens, split, zeros), cfg), h);
        }
        const double gain_db = 10.0 * std::log10(zero_nmse / model_nmse);
        INFO("zero-fill NMSE " << zero_nmse / 20.0 << ", model NMSE " << model_nmse / 20.0
                               << ", gain " << gain_db << " dB");
        REQUIRE(gain_db >= 3.0);
    }
}

TEST_CASE("build_ladder lands within 20% of each target", "[mae]") {
    SECTION("desk ladder 30K..1M") {
        const std::vector<std::uint64_t> targets{30000, 100000, 300000, 1000000};
        const auto ladder = build_ladder(targets);
        REQUIRE(ladder.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            const auto count = config_param_count(ladder[i]);
            const double rel = double(count) / double(targets[i]) - 1.0;
            INFO("target " << targets[i] << " -> " << count << " (E=" << ladder[i].embed_dim
                           << ", D=" << ladder[i].decoder_embed_dim << ")");
            REQUIRE(std::abs(rel) <= 0.20);
            const double frac = decoder_fraction(ladder[i]);
            REQUIRE(frac >= 0.08);
            REQUIRE(frac <= 0.14);
            REQUIRE(ladder[i].target_params == targets[i]);
        }
        for (std::size_t i = 1; i < 4; ++i) { // monotone in every scaled dimension
            REQUIRE(ladder[i].embed_dim > ladder[i - 1].embed_dim);
            REQUIRE(ladder[i].decoder_embed_dim > ladder[i - 1].decoder_embed_dim);
            REQUIRE(ladder[i].encoder_depth >= ladder[i - 1].encoder_depth);
            REQUIRE(config_param_count(ladder[i]) > config_param_count(ladder[i - 1]));
        }
    }

    SECTION("ladder respects an alternate base grid") {
        ModelConfig base;
        base.grid_rows = 32;
        base.grid_cols = 16;
        const auto ladder = build_ladder({8000, 20000, 30000}, base);
        for (std::size_t i = 0; i < ladder.size(); ++i) {
            REQUIRE(ladder[i].grid_rows == 32);
            const std::uint64_t target = i == 0 ? 8000 : i == 1 ? 20000 : 30000;
            REQUIRE(std::abs(double(config_param_count(ladder[i])) / double(target) - 1.0) <=
                    0.20);
        }
    }

    SECTION("absurd targets and bad orderings are rejected") {
        try {
            build_ladder({10});
            FAIL("expected infeasible_config");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::infeasible_config);
        }
        try {
            build_ladder({100000, 30000});
            FAIL("expected invalid_argument");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::invalid_argument);
        }
    }
}

TEST_CASE("flops accounting is self-consistent across the ladder", "[mae]") {
    const auto ladder = build_ladder({30000, 100000, 300000, 1000000});
    const auto macs = [](const ModelConfig &c) {
        const double T = c.n_tokens();
        const double Tv = T - std::floor(c.mask_ratio * T);
        const double E = c.embed_dim, D = c.decoder_embed_dim, P = c.patch_dim();
        return Tv * P * E + c.encoder_depth * (12.0 * Tv * E * E + 2.0 * Tv * Tv * E) +
               Tv * E * D + c.decoder_depth * (12.0 * T * D * D + 2.0 * T * T * D) + T * D * P;
    };
    const double reported =
        flops_estimate(ladder.back(), FlopsMode::inference) /
        flops_estimate(ladder.front(), FlopsMode::inference);
    const double analytic = macs(ladder.back()) / macs(ladder.front());
    REQUIRE(reported == Catch::Approx(analytic).epsilon(0.01));
    REQUIRE(reported > 1.0);

    for (const auto &c : ladder) {
        REQUIRE(flops_estimate(c, FlopsMode::ttt_step) > flops_estimate(c, FlopsMode::inference));
        REQUIRE(flops_estimate(c, FlopsMode::inference) > 0.0);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly", "[mae]") {
    const std::string path = "test_ckpt.wnn";
    const ModelConfig cfg = tiny_config();
    ModelState m = init_model(cfg, 12);
    synth::ScenarioConfig sc;
    sc.n_antennas = 16;
    sc.n_subcarriers = 8;
    sc.seed = 13;
    const auto ds = synth::synthesize_dataset(sc, 16, "ckpt");
    pretrain(m, ds, 10, 2, 1e-3, 5);

    SECTION("save -> load -> save produces identical bytes") {
        save_checkpoint(m, path);
        const ModelState back = load_checkpoint(path);
        REQUIRE(nlohmann::json(back.config) == nlohmann::json(m.config));
        // values survive at f32 precision
        for (std::size_t i = 0; i < m.encoder.tensors.size(); ++i)
            for (std::size_t j = 0; j < m.encoder.tensors[i]->value.size(); ++j)
                REQUIRE(back.encoder.tensors[i]->value.v[j] ==
                        double(float(m.encoder.tensors[i]->value.v[j])));
        const std::string path2 = "test_ckpt2.wnn";
        save_checkpoint(back, path2);
        std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
        const std::string b1((std::istreambuf_iterator<char>(f1)),
                             std::istreambuf_iterator<char>());
        const std::string b2((std::istreambuf_iterator<char>(f2)),
                             std::istreambuf_iterator<char>());
        REQUIRE(b1 == b2);
        REQUIRE_FALSE(b1.empty());
        std::remove(path2.c_str());
        std::remove(path.c_str());
    }

    SECTION("frozen groups survive the round trip") {
        m.encoder.set_trainable(false);
        save_checkpoint(m, path);
        const ModelState back = load_checkpoint(path);
        REQUIRE_FALSE(back.encoder.trainable);
        REQUIRE(back.decoder.trainable);
        std::remove(path.c_str());
    }

    SECTION("corruption is reported distinctly") {
        save_checkpoint(m, path);
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        in.close();

        const auto write_bytes = [&](const std::string &p, const std::string &b) {
            std::ofstream os(p, std::ios::binary | std::ios::trunc);
            os.write(b.data(), std::streamsize(b.size()));
        };

        std::string bad = bytes;
        bad[0] = 'X';
        write_bytes(path, bad);
        try {
            load_checkpoint(path);
            FAIL("expected bad_magic");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::bad_magic);
        }

        bad = bytes;
        bad[4] = 9; // version low byte
        write_bytes(path, bad);
        try {
            load_checkpoint(path);
            FAIL("expected version_mismatch");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::version_mismatch);
        }

        write_bytes(path, bytes.substr(0, bytes.size() / 2));
        try {
            load_checkpoint(path);
            FAIL("expected truncated_file");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::truncated_file);
        }

        std::remove(path.c_str());
        try {
            load_checkpoint(path);
            FAIL("expected io_failure");
        } catch (const Error &e) {
            REQUIRE(e.code() == ErrorCode::io_failure);
        }
    }
}
