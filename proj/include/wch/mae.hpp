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

#ifndef WCH_MAE_HPP
#define WCH_MAE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wch/channel.hpp"
#include "wch/errors.hpp"
#include "wch/rng.hpp"
#include "wch/tensor.hpp"

namespace wch::mae {

/// Architecture of one masked-autoencoder channel model. The grid dimensions
/// tie the model to a channel-matrix shape; everything else follows the
/// standard MAE layout (patch embedding, pre-LN transformer encoder over
/// visible tokens, light decoder over all tokens with a learned mask token).
struct ModelConfig {
    std::uint32_t grid_rows = 128; // channel matrix shape the model expects
    std::uint32_t grid_cols = 76;
    std::uint32_t patch_rows = 4;
    std::uint32_t patch_cols = 4;
    std::uint32_t embed_dim = 64;
    std::uint32_t n_heads = 8;
    std::uint32_t encoder_depth = 4;
    std::uint32_t decoder_embed_dim = 32;
    std::uint32_t decoder_depth = 1;
    double mask_ratio = 0.5;
    std::uint64_t target_params = 0; // advisory; 0 = unset

    std::uint32_t n_tokens() const {
        return (grid_rows / patch_rows) * (grid_cols / patch_cols);
    }
    std::uint32_t patch_dim() const { return 2 * patch_rows * patch_cols; }
    /// Largest divisor of the decoder width that does not exceed n_heads.
    std::uint32_t decoder_heads() const {
        for (std::uint32_t h = std::min(n_heads, decoder_embed_dim); h >= 2; --h)
            if (decoder_embed_dim % h == 0)
                return h;
        return 1;
    }
};

inline void to_json(nlohmann::json &j, const ModelConfig &c) {
    j = nlohmann::json{{"grid_rows", c.grid_rows},
                       {"grid_cols", c.grid_cols},
                       {"patch_rows", c.patch_rows},
                       {"patch_cols", c.patch_cols},
                       {"embed_dim", c.embed_dim},
                       {"n_heads", c.n_heads},
                       {"encoder_depth", c.encoder_depth},
                       {"decoder_embed_dim", c.decoder_embed_dim},
                       {"decoder_depth", c.decoder_depth},
                       {"mask_ratio", c.mask_ratio},
                       {"target_params", c.target_params}};
}

inline void from_json(const nlohmann::json &j, ModelConfig &c) {
    j.at("grid_rows").get_to(c.grid_rows);
    j.at("grid_cols").get_to(c.grid_cols);
    j.at("patch_rows").get_to(c.patch_rows);
    j.at("patch_cols").get_to(c.patch_cols);
    j.at("embed_dim").get_to(c.embed_dim);
    j.at("n_heads").get_to(c.n_heads);
    j.at("encoder_depth").get_to(c.encoder_depth);
    j.at("decoder_embed_dim").get_to(c.decoder_embed_dim);
    j.at("decoder_depth").get_to(c.decoder_depth);
    j.at("mask_ratio").get_to(c.mask_ratio);
    j.at("target_params").get_to(c.target_params);
}

/// Analytic parameter counts; model construction is tested against these.
inline std::uint64_t encoder_param_count(const ModelConfig &c) {
    const std::uint64_t E = c.embed_dim, P = c.patch_dim(), T = c.n_tokens();
    const std::uint64_t block = 12 * E * E + 13 * E; // qkv/o + MLP + 2 LN
    return P * E + E + T * E + c.encoder_depth * block + 2 * E;
}

inline std::uint64_t decoder_param_count(const ModelConfig &c) {
    const std::uint64_t E = c.embed_dim, D = c.decoder_embed_dim, P = c.patch_dim(),
                        T = c.n_tokens();
    const std::uint64_t block = 12 * D * D + 13 * D;
    return E * D + D + D + T * D + c.decoder_depth * block + 2 * D + D * P + P;
}

inline std::uint64_t config_param_count(const ModelConfig &c) {
    return encoder_param_count(c) + decoder_param_count(c);
}

inline double decoder_fraction(const ModelConfig &c) {
    return double(decoder_param_count(c)) / double(config_param_count(c));
}

inline void validate_model_config(const ModelConfig &c) {
    require(c.grid_rows >= 1 && c.grid_cols >= 1, ErrorCode::invalid_argument,
            "grid dims must be positive");
    require(c.patch_rows >= 1 && c.patch_cols >= 1, ErrorCode::invalid_argument,
            "patch dims must be positive");
    require(c.grid_rows % c.patch_rows == 0 && c.grid_cols % c.patch_cols == 0,
            ErrorCode::invalid_shape,
            "patch " + std::to_string(c.patch_rows) + "x" + std::to_string(c.patch_cols) +
                " does not divide grid " + std::to_string(c.grid_rows) + "x" +
                std::to_string(c.grid_cols));
    require(c.n_tokens() >= 2, ErrorCode::invalid_argument,
            "need at least 2 tokens to mask and reconstruct");
    require(c.embed_dim >= 1 && c.decoder_embed_dim >= 1, ErrorCode::invalid_argument,
            "embed dims must be positive");
    require(c.n_heads >= 1 && c.embed_dim % c.n_heads == 0, ErrorCode::invalid_shape,
            "n_heads = " + std::to_string(c.n_heads) + " must divide embed_dim = " +
                std::to_string(c.embed_dim));
    require(c.encoder_depth >= 1 && c.decoder_depth >= 1, ErrorCode::invalid_argument,
            "depths must be >= 1");
    require(c.mask_ratio > 0.0 && c.mask_ratio < 1.0, ErrorCode::invalid_argument,
            "mask_ratio must lie in (0, 1)");
    const double frac = decoder_fraction(c);
    require(frac >= 0.08 && frac <= 0.14, ErrorCode::infeasible_config,
            "decoder fraction " + std::to_string(frac) + " outside [0.08, 0.14]");
}

namespace detail {

struct BlockVars {
    nn::Var ln1g, ln1b, wq, bq, wk, bk, wv, bv, wo, bo;
    nn::Var ln2g, ln2b, w1, b1, w2, b2;
};

struct ModelVars {
    nn::Var patch_w, patch_b, pos;
    std::vector<BlockVars> enc_blocks;
    nn::Var enc_lng, enc_lnb;
    nn::Var dec_w, dec_b, mask_token, dec_pos;
    std::vector<BlockVars> dec_blocks;
    nn::Var dec_lng, dec_lnb, head_w, head_b;
};

} // namespace detail

/// A model instance: configuration, parameters split into the encoder and
/// decoder groups (the split test-time training relies on), and the training
/// log. Move-only; use clone_model for deep copies.
struct ModelState {
    ModelConfig config;
    detail::ModelVars vars;
    nn::ParamGroup encoder; // name "encoder"
    nn::ParamGroup decoder; // name "decoder"
    std::vector<std::string> encoder_names, decoder_names;
    std::vector<std::pair<std::uint64_t, double>> training_log;

    ModelState() = default;
    ModelState(const ModelState &) = delete;
    ModelState &operator=(const ModelState &) = delete;
    ModelState(ModelState &&) = default;
    ModelState &operator=(ModelState &&) = default;
};

namespace detail {

class ModelBuilder {
  public:
    ModelBuilder(ModelState &m, CounterRng &rng) : m_(m), rng_(rng) {}

    nn::Var weight(const std::string &name, std::size_t rows, std::size_t cols,
                   bool decoder_group) {
        nn::Tensor t(rows, cols);
        const double std = std::sqrt(2.0 / double(rows + cols));
        for (auto &v : t.v)
            v = std * rng_.next_gaussian();
        return put(name, std::move(t), decoder_group);
    }
    nn::Var embedding(const std::string &name, std::size_t rows, std::size_t cols,
                      bool decoder_group) {
        nn::Tensor t(rows, cols);
        for (auto &v : t.v)
            v = 0.02 * rng_.next_gaussian();
        return put(name, std::move(t), decoder_group);
    }
    nn::Var zeros(const std::string &name, std::size_t cols, bool decoder_group) {
        return put(name, nn::Tensor(1, cols), decoder_group);
    }
    nn::Var ones_row(const std::string &name, std::size_t cols, bool decoder_group) {
        nn::Tensor t(1, cols);
        for (auto &v : t.v)
            v = 1.0;
        return put(name, std::move(t), decoder_group);
    }

    BlockVars block(const std::string &prefix, std::size_t width, bool decoder_group) {
        BlockVars b;
        b.ln1g = ones_row(prefix + ".ln1.g", width, decoder_group);
        b.ln1b = zeros(prefix + ".ln1.b", width, decoder_group);
        b.wq = weight(prefix + ".wq", width, width, decoder_group);
        b.bq = zeros(prefix + ".bq", width, decoder_group);
        b.wk = weight(prefix + ".wk", width, width, decoder_group);
        b.bk = zeros(prefix + ".bk", width, decoder_group);
        b.wv = weight(prefix + ".wv", width, width, decoder_group);
        b.bv = zeros(prefix + ".bv", width, decoder_group);
        b.wo = weight(prefix + ".wo", width, width, decoder_group);
        b.bo = zeros(prefix + ".bo", width, decoder_group);
        b.ln2g = ones_row(prefix + ".ln2.g", width, decoder_group);
        b.ln2b = zeros(prefix + ".ln2.b", width, decoder_group);
        b.w1 = weight(prefix + ".mlp.w1", width, 4 * width, decoder_group);
        b.b1 = zeros(prefix + ".mlp.b1", 4 * width, decoder_group);
        b.w2 = weight(prefix + ".mlp.w2", 4 * width, width, decoder_group);
        b.b2 = zeros(prefix + ".mlp.b2", width, decoder_group);
        return b;
    }

  private:
    nn::Var put(const std::string &name, nn::Tensor t, bool decoder_group) {
        auto var = nn::leaf(std::move(t), true);
        if (decoder_group) {
            m_.decoder.tensors.push_back(var);
            m_.decoder_names.push_back(name);
        } else {
            m_.encoder.tensors.push_back(var);
            m_.encoder_names.push_back(name);
        }
        return var;
    }
    ModelState &m_;
    CounterRng &rng_;
};

} // namespace detail

/// Builds a freshly initialized model. Weights use fan-balanced Gaussian
/// init, embeddings and the mask token N(0, 0.02), biases zero, LN gains one.
/// Deterministic in (config, seed).
inline ModelState init_model(const ModelConfig &config, std::uint64_t seed) {
    validate_model_config(config);
    ModelState m;
    m.config = config;
    m.encoder.name = "encoder";
    m.decoder.name = "decoder";

    CounterRng rng(hash_seed(seed, 0x6D6F64656CULL)); // dedicated init stream
    detail::ModelBuilder b(m, rng);
    const std::size_t E = config.embed_dim, D = config.decoder_embed_dim;
    const std::size_t P = config.patch_dim(), T = config.n_tokens();

    m.vars.patch_w = b.weight("patch_proj.w", P, E, false);
    m.vars.patch_b = b.zeros("patch_proj.b", E, false);
    m.vars.pos = b.embedding("pos_embed", T, E, false);
    for (std::uint32_t l = 0; l < config.encoder_depth; ++l)
        m.vars.enc_blocks.push_back(b.block("enc." + std::to_string(l), E, false));
    m.vars.enc_lng = b.ones_row("enc.final_ln.g", E, false);
    m.vars.enc_lnb = b.zeros("enc.final_ln.b", E, false);

    m.vars.dec_w = b.weight("dec_embed.w", E, D, true);
    m.vars.dec_b = b.zeros("dec_embed.b", D, true);
    m.vars.mask_token = b.embedding("mask_token", 1, D, true);
    m.vars.dec_pos = b.embedding("dec_pos_embed", T, D, true);
    for (std::uint32_t l = 0; l < config.decoder_depth; ++l)
        m.vars.dec_blocks.push_back(b.block("dec." + std::to_string(l), D, true));
    m.vars.dec_lng = b.ones_row("dec.final_ln.g", D, true);
    m.vars.dec_lnb = b.zeros("dec.final_ln.b", D, true);
    // The output head starts near zero so an untrained model predicts the
    // (zero-mean) ensemble mean rather than unit-power noise.
    m.vars.head_w = b.embedding("head.w", D, P, true);
    m.vars.head_b = b.zeros("head.b", P, true);

    const auto counted = nn::param_count({&m.encoder, &m.decoder});
    require(counted.per_group[0].second == encoder_param_count(config) &&
                counted.per_group[1].second == decoder_param_count(config),
            ErrorCode::invalid_state, "constructed model disagrees with analytic counts");
    return m;
}

/// Deep copy: fresh leaves with identical values, group flags, and log.
inline ModelState clone_model(const ModelState &src) {
    ModelState dst = init_model(src.config, 0);
    for (std::size_t i = 0; i < src.encoder.tensors.size(); ++i)
        dst.encoder.tensors[i]->value = src.encoder.tensors[i]->value;
    for (std::size_t i = 0; i < src.decoder.tensors.size(); ++i)
        dst.decoder.tensors[i]->value = src.decoder.tensors[i]->value;
    dst.encoder.set_trainable(src.encoder.trainable);
    dst.decoder.set_trainable(src.decoder.trainable);
    dst.training_log = src.training_log;
    return dst;
}

/// Splits a channel matrix into non-overlapping patches, row-major patch
/// order, each flattened as [real parts; imaginary parts].
inline nn::Tensor patchify(const synth::ChannelMatrix &h, const ModelConfig &c) {
    require(h.n_antennas == c.grid_rows && h.n_subcarriers == c.grid_cols,
            ErrorCode::invalid_shape,
            "channel matrix " + std::to_string(h.n_antennas) + "x" +
                std::to_string(h.n_subcarriers) + " does not match model grid " +
                std::to_string(c.grid_rows) + "x" + std::to_string(c.grid_cols));
    require(c.grid_rows % c.patch_rows == 0 && c.grid_cols % c.patch_cols == 0,
            ErrorCode::invalid_shape, "patch shape does not divide the grid");
    const std::uint32_t pr = c.patch_rows, pc = c.patch_cols;
    const std::uint32_t tiles_r = c.grid_rows / pr, tiles_c = c.grid_cols / pc;
    const std::uint32_t half = pr * pc;
    nn::Tensor tokens(std::size_t(tiles_r) * tiles_c, 2 * half);
    for (std::uint32_t tr = 0; tr < tiles_r; ++tr)
        for (std::uint32_t tc = 0; tc < tiles_c; ++tc) {
            const std::size_t t = std::size_t(tr) * tiles_c + tc;
            for (std::uint32_t i = 0; i < pr; ++i)
                for (std::uint32_t j = 0; j < pc; ++j) {
                    const auto z = h.at(tr * pr + i, tc * pc + j);
                    const std::size_t e = std::size_t(i) * pc + j;
                    tokens.at(t, e) = double(z.real());
                    tokens.at(t, half + e) = double(z.imag());
                }
        }
    return tokens;
}

/// Inverse of patchify (values cast back to 32-bit complex floats).
inline synth::ChannelMatrix unpatchify(const nn::Tensor &tokens, const ModelConfig &c) {
    require(tokens.rows == c.n_tokens() && tokens.cols == c.patch_dim(),
            ErrorCode::invalid_shape,
            "token matrix " + tokens.shape_str() + " does not match the model layout");
    const std::uint32_t pr = c.patch_rows, pc = c.patch_cols;
    const std::uint32_t tiles_c = c.grid_cols / pc;
    const std::uint32_t half = pr * pc;
    synth::ChannelMatrix h(c.grid_rows, c.grid_cols);
    for (std::size_t t = 0; t < tokens.rows; ++t) {
        const std::uint32_t tr = std::uint32_t(t) / tiles_c, tc = std::uint32_t(t) % tiles_c;
        for (std::uint32_t i = 0; i < pr; ++i)
            for (std::uint32_t j = 0; j < pc; ++j) {
                const std::size_t e = std::size_t(i) * pc + j;
                h.at(tr * pr + i, tc * pc + j) =
                    std::complex<float>(float(tokens.at(t, e)), float(tokens.at(t, half + e)));
            }
    }
    return h;
}

/// Which tokens are hidden from the encoder. row_source rebuilds the full
/// token sequence from encoder outputs: entry r is the visible-row index, or
/// -1 where the mask token goes.
struct MaskSplit {
    std::vector<std::uint32_t> visible;
    std::vector<std::uint32_t> masked;
    std::vector<std::int32_t> row_source;
};

/// Uniformly random mask of floor(ratio * n) tokens, deterministic in seed.
inline MaskSplit apply_mask(std::size_t n_tokens, double mask_ratio, std::uint64_t seed) {
    require(mask_ratio > 0.0 && mask_ratio < 1.0, ErrorCode::invalid_argument,
            "mask_ratio must lie in (0, 1)");
    const std::size_t n_masked = std::size_t(std::floor(mask_ratio * double(n_tokens)));
    require(n_masked >= 1 && n_masked < n_tokens, ErrorCode::invalid_argument,
            "mask_ratio " + std::to_string(mask_ratio) + " is degenerate for " +
                std::to_string(n_tokens) + " tokens");

    std::vector<std::uint32_t> perm(n_tokens);
    std::iota(perm.begin(), perm.end(), 0u);
    CounterRng rng(seed);
    for (std::size_t i = 0; i < n_masked; ++i) {
        const std::size_t j = i + std::size_t(rng.next_below(std::uint64_t(n_tokens - i)));
        std::swap(perm[i], perm[j]);
    }
    MaskSplit s;
    s.masked.assign(perm.begin(), perm.begin() + std::ptrdiff_t(n_masked));
    s.visible.assign(perm.begin() + std::ptrdiff_t(n_masked), perm.end());
    std::sort(s.masked.begin(), s.masked.end());
    std::sort(s.visible.begin(), s.visible.end());
    s.row_source.assign(n_tokens, -1);
    for (std::size_t r = 0; r < s.visible.size(); ++r)
        s.row_source[s.visible[r]] = std::int32_t(r);
    return s;
}

/// Convenience form mirroring the op signature: returns the visible token
/// rows plus the masked index set.
inline std::pair<nn::Tensor, std::vector<std::uint32_t>>
apply_mask(const nn::Tensor &tokens, double mask_ratio, std::uint64_t seed) {
    const MaskSplit s = apply_mask(tokens.rows, mask_ratio, seed);
    nn::Tensor vis(s.visible.size(), tokens.cols);
    for (std::size_t r = 0; r < s.visible.size(); ++r)
        std::copy(tokens.v.begin() + std::ptrdiff_t(s.visible[r] * tokens.cols),
                  tokens.v.begin() + std::ptrdiff_t((s.visible[r] + 1) * tokens.cols),
                  vis.v.begin() + std::ptrdiff_t(r * tokens.cols));
    return {std::move(vis), s.masked};
}

namespace detail {

inline nn::Var transformer_block(const nn::Var &x, const BlockVars &b, std::size_t heads) {
    using namespace nn;
    const Var h = layer_norm(x, b.ln1g, b.ln1b);
    const Var q = add_row_bias(matmul(h, b.wq), b.bq);
    const Var k = add_row_bias(matmul(h, b.wk), b.bk);
    const Var v = add_row_bias(matmul(h, b.wv), b.bv);
    const Var att = add_row_bias(matmul(multi_head_attention(q, k, v, heads), b.wo), b.bo);
    const Var x2 = add(x, att);
    const Var h2 = layer_norm(x2, b.ln2g, b.ln2b);
    const Var mlp =
        add_row_bias(matmul(gelu(add_row_bias(matmul(h2, b.w1), b.b1)), b.w2), b.b2);
    return add(x2, mlp);
}

/// Full reconstruction pass: encode the visible tokens, fill masked slots
/// with the mask token, decode every position. Returns T x patch_dim
/// predictions.
inline nn::Var forward_predictions(const ModelState &m, const nn::Tensor &tokens,
                                   const MaskSplit &split) {
    using namespace nn;
    require(tokens.rows == m.config.n_tokens() && tokens.cols == m.config.patch_dim(),
            ErrorCode::invalid_shape,
            "token matrix " + tokens.shape_str() + " does not match the model layout");
    require(!split.visible.empty(), ErrorCode::invalid_argument, "no visible tokens");
    require(!split.masked.empty(), ErrorCode::invalid_argument, "no masked tokens");

    Tensor vis(split.visible.size(), tokens.cols);
    for (std::size_t r = 0; r < split.visible.size(); ++r)
        std::copy(tokens.v.begin() + std::ptrdiff_t(split.visible[r] * tokens.cols),
                  tokens.v.begin() + std::ptrdiff_t((split.visible[r] + 1) * tokens.cols),
                  vis.v.begin() + std::ptrdiff_t(r * tokens.cols));

    Var x = add_row_bias(matmul(constant(std::move(vis)), m.vars.patch_w), m.vars.patch_b);
    x = add(x, gather_rows(m.vars.pos, split.visible));
    for (const auto &blk : m.vars.enc_blocks)
        x = transformer_block(x, blk, m.config.n_heads);
    x = layer_norm(x, m.vars.enc_lng, m.vars.enc_lnb);

    Var d = add_row_bias(matmul(x, m.vars.dec_w), m.vars.dec_b);
    d = compose_rows(d, m.vars.mask_token, split.row_source);
    d = add(d, m.vars.dec_pos);
    for (const auto &blk : m.vars.dec_blocks)
        d = transformer_block(d, blk, m.config.decoder_heads());
    d = layer_norm(d, m.vars.dec_lng, m.vars.dec_lnb);
    return add_row_bias(matmul(d, m.vars.head_w), m.vars.head_b);
}

struct LossBreakdown {
    nn::Var loss;        // scalar node (for backward)
    double value = 0.0;  // loss as a plain number
    double signal = 0.0; // mean square of the true values at masked positions
};

/// MCM loss given predictions and targets explicitly; the masked-only mask is
/// derived from the split. Seam for oracle-decoder tests.
inline LossBreakdown mcm_loss_from_predictions(const nn::Var &pred, const nn::Var &target,
                                               const MaskSplit &split) {
    using namespace nn;
    require(!split.masked.empty(), ErrorCode::invalid_argument, "no masked tokens");
    const Tensor &tv = target->value;
    Tensor mask(tv.rows, tv.cols);
    double signal = 0.0;
    for (const auto t : split.masked)
        for (std::size_t j = 0; j < tv.cols; ++j) {
            mask.at(t, j) = 1.0;
            signal += tv.at(t, j) * tv.at(t, j);
        }
    signal /= double(split.masked.size() * tv.cols);
    LossBreakdown out;
    out.loss = mse(pred, target, constant(std::move(mask)));
    out.value = out.loss->value.v[0];
    out.signal = signal;
    return out;
}

inline LossBreakdown mcm_loss_node(const ModelState &m, const nn::Tensor &tokens,
                                   const MaskSplit &split) {
    return mcm_loss_from_predictions(forward_predictions(m, tokens, split),
                                     nn::constant(tokens), split);
}

/// Visible rows pass through from tokens; masked rows come from predictions.
inline nn::Tensor merge_predictions(const nn::Tensor &tokens, const MaskSplit &split,
                                    const nn::Tensor &pred) {
    require(pred.rows == tokens.rows && pred.cols == tokens.cols, ErrorCode::invalid_shape,
            "prediction matrix " + pred.shape_str() + " does not match tokens " +
                tokens.shape_str());
    nn::Tensor merged = tokens;
    for (const auto t : split.masked)
        for (std::size_t j = 0; j < tokens.cols; ++j) {
            const double v = pred.at(t, j);
            require(std::isfinite(v), ErrorCode::invalid_state,
                    "non-finite reconstruction value");
            merged.at(t, j) = v;
        }
    return merged;
}

} // namespace detail

/// Reconstruction error in dB relative to the signal power at the same
/// positions: 10 log10(loss / signal_power).
inline double loss_to_db(double loss, double signal_power) {
    require(signal_power > 0.0, ErrorCode::invalid_argument, "signal power must be > 0");
    if (loss <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(loss / signal_power);
}

/// Masked-channel-modeling loss of one sample: MSE between predicted and true
/// patch values, averaged over masked positions only.
inline double mcm_loss(const ModelState &m, const synth::ChannelMatrix &h,
                       std::uint64_t mask_seed) {
    const nn::Tensor tokens = patchify(h, m.config);
    const MaskSplit split = apply_mask(tokens.rows, m.config.mask_ratio, mask_seed);
    return detail::mcm_loss_node(m, tokens, split).value;
}

/// Adam pre-training of encoder and decoder on the MCM objective. Batches are
/// drawn with replacement; the loss logged per step is the batch mean.
/// Deterministic in (model init, dataset, seed).
inline void pretrain(ModelState &m, const synth::ChannelDataset &ds, std::uint64_t steps,
                     std::uint32_t batch_size, double lr, std::uint64_t seed) {
    require(steps >= 1, ErrorCode::invalid_argument, "steps must be >= 1");
    require(batch_size >= 1, ErrorCode::invalid_argument, "batch_size must be >= 1");
    require(!ds.samples.empty(), ErrorCode::invalid_argument, "dataset is empty");
    require(lr > 0.0, ErrorCode::invalid_argument, "learning rate must be > 0");

    nn::AdamState opt;
    opt.lr = lr;
    std::vector<nn::ParamGroup *> groups{&m.encoder, &m.decoder};
    CounterRng pick(hash_seed(seed, 0x7072657472ULL));

    for (std::uint64_t step = 1; step <= steps; ++step) {
        double batch_loss = 0.0;
        for (std::uint32_t b = 0; b < batch_size; ++b) {
            const std::size_t idx = std::size_t(pick.next_below(ds.samples.size()));
            const nn::Tensor tokens = patchify(ds.samples[idx], m.config);
            const MaskSplit split =
                apply_mask(tokens.rows, m.config.mask_ratio, hash_seed(seed, step, b));
            auto lb = detail::mcm_loss_node(m, tokens, split);
            batch_loss += lb.value;
            nn::backward(nn::scale(lb.loss, 1.0 / double(batch_size)));
        }
        batch_loss /= double(batch_size);
        if (!std::isfinite(batch_loss)) {
            nn::zero_grad(groups);
            throw_error(ErrorCode::training_diverged,
                        "non-finite loss at step " + std::to_string(step));
        }
        nn::adam_step(groups, opt);
        m.training_log.emplace_back(step, batch_loss);
    }
}

/// Fills the masked patches of h from decoder predictions; visible patches
/// pass through untouched. token_visible has one flag per token.
inline synth::ChannelMatrix reconstruct(const ModelState &m, const synth::ChannelMatrix &h,
                                        const std::vector<std::uint8_t> &token_visible) {
    const nn::Tensor tokens = patchify(h, m.config);
    require(token_visible.size() == tokens.rows, ErrorCode::invalid_shape,
            "visibility mask has " + std::to_string(token_visible.size()) +
                " entries for " + std::to_string(tokens.rows) + " tokens");
    MaskSplit split;
    split.row_source.assign(tokens.rows, -1);
    for (std::size_t t = 0; t < tokens.rows; ++t) {
        if (token_visible[t]) {
            split.row_source[t] = std::int32_t(split.visible.size());
            split.visible.push_back(std::uint32_t(t));
        } else {
            split.masked.push_back(std::uint32_t(t));
        }
    }
    require(!split.visible.empty(), ErrorCode::invalid_argument,
            "reconstruct needs at least one visible token");
    if (split.masked.empty())
        return h; // everything visible: pure pass-through

    const nn::Var pred = detail::forward_predictions(m, tokens, split);
    return unpatchify(detail::merge_predictions(tokens, split, pred->value), m.config);
}

/// Desk-scale model ladder: for each ascending parameter target, pick the
/// narrowest schedule entry (embed width a multiple of 8, depth 2 up to width
/// 32 and 4 beyond, decoder depth 1) whose decoder width can land the total
/// within +/-20% of the target while keeping the decoder share in [8%, 14%].
inline std::vector<ModelConfig> build_ladder(const std::vector<std::uint64_t> &targets,
                                             const ModelConfig &base = ModelConfig{}) {
    require(!targets.empty(), ErrorCode::invalid_argument, "no targets given");
    for (std::size_t i = 1; i < targets.size(); ++i)
        require(targets[i] > targets[i - 1], ErrorCode::invalid_argument,
                "targets must be strictly ascending");

    std::vector<ModelConfig> out;
    for (const auto target : targets) {
        ModelConfig best;
        double best_err = std::numeric_limits<double>::infinity();
        for (std::uint32_t e = 8; e <= 256; e += 8) {
            ModelConfig c = base;
            c.embed_dim = e;
            c.n_heads = std::min<std::uint32_t>(8, std::max<std::uint32_t>(1, e / 8));
            c.encoder_depth = e <= 32 ? 2 : 4;
            c.decoder_depth = 1;
            c.target_params = target;
            for (std::uint32_t d = 1; d <= e; ++d) {
                c.decoder_embed_dim = d;
                const double frac = decoder_fraction(c);
                if (frac < 0.08 || frac > 0.14)
                    continue;
                const double err =
                    std::abs(std::log(double(config_param_count(c)) / double(target)));
                if (err < best_err) {
                    best_err = err;
                    best = c;
                }
            }
        }
        const double rel =
            best_err == std::numeric_limits<double>::infinity()
                ? std::numeric_limits<double>::infinity()
                : std::abs(double(config_param_count(best)) / double(target) - 1.0);
        require(rel <= 0.20, ErrorCode::infeasible_config,
                "no config within 20% of target " + std::to_string(target) +
                    " satisfies the decoder-fraction constraint");
        validate_model_config(best);
        out.push_back(best);
    }
    return out;
}

/// Cost accounting, 2 x multiply-accumulate count per layer, in GFLOPs.
/// inference: one reconstruction pass at the config's mask ratio (encoder
/// sees the visible tokens, decoder all tokens). ttt_step: that same pass
/// plus the decoder-side backward, costed at twice the decoder forward.
enum class FlopsMode { inference, ttt_step };

inline double flops_estimate(const ModelConfig &c, FlopsMode mode) {
    validate_model_config(c);
    const double T = double(c.n_tokens());
    const double Tv = T - std::floor(c.mask_ratio * T); // visible tokens
    const double E = double(c.embed_dim), D = double(c.decoder_embed_dim);
    const double P = double(c.patch_dim());

    const double embed_macs = Tv * P * E;
    const double enc_macs = double(c.encoder_depth) * (12.0 * Tv * E * E + 2.0 * Tv * Tv * E);
    const double enc2dec_macs = Tv * E * D;
    const double dec_macs = double(c.decoder_depth) * (12.0 * T * D * D + 2.0 * T * T * D);
    const double head_macs = T * D * P;

    const double decoder_side = enc2dec_macs + dec_macs + head_macs;
    double macs = embed_macs + enc_macs + decoder_side;
    if (mode == FlopsMode::ttt_step)
        macs += 2.0 * decoder_side; // backward through the decoder only
    return 2.0 * macs / 1e9;
}

// ----- checkpoint container ------------------------------------------------
//
//   magic    "WNN1", version u16 = 1
//   config   u32 length + JSON bytes
//   groups   u8 count, then per group: u8 name length + name, u8 trainable,
//            u32 tensor count, per tensor: u16 name length + name,
//            u32 rows, u32 cols, f32 values (little-endian)

inline constexpr char kCheckpointMagic[4] = {'W', 'N', 'N', '1'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

inline void write_u16(std::ostream &os, std::uint16_t v) {
    unsigned char b[2] = {(unsigned char)(v & 0xFF), (unsigned char)(v >> 8)};
    os.write(reinterpret_cast<const char *>(b), 2);
}
inline void write_u32(std::ostream &os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = (unsigned char)((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char *>(b), 4);
}
inline void write_f32(std::ostream &os, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32(os, bits);
}
inline void read_bytes(std::istream &is, void *p, std::size_t n) {
    is.read(static_cast<char *>(p), std::streamsize(n));
    require(bool(is), ErrorCode::truncated_file, "unexpected end of checkpoint");
}
inline std::uint16_t read_u16(std::istream &is) {
    unsigned char b[2];
    read_bytes(is, b, 2);
    return std::uint16_t(b[0] | (b[1] << 8));
}
inline std::uint32_t read_u32(std::istream &is) {
    unsigned char b[4];
    read_bytes(is, b, 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}
inline float read_f32(std::istream &is) {
    const std::uint32_t bits = read_u32(is);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

inline void write_group(std::ostream &os, const nn::ParamGroup &g,
                        const std::vector<std::string> &names) {
    os.put(char(g.name.size()));
    os.write(g.name.data(), std::streamsize(g.name.size()));
    os.put(g.trainable ? 1 : 0);
    write_u32(os, std::uint32_t(g.tensors.size()));
    for (std::size_t i = 0; i < g.tensors.size(); ++i) {
        write_u16(os, std::uint16_t(names[i].size()));
        os.write(names[i].data(), std::streamsize(names[i].size()));
        write_u32(os, std::uint32_t(g.tensors[i]->value.rows));
        write_u32(os, std::uint32_t(g.tensors[i]->value.cols));
        for (const double v : g.tensors[i]->value.v)
            write_f32(os, float(v));
    }
}

inline void read_group(std::istream &is, nn::ParamGroup &g,
                       const std::vector<std::string> &names) {
    const std::uint8_t name_len = std::uint8_t(is.get());
    require(bool(is), ErrorCode::truncated_file, "unexpected end of checkpoint");
    std::string name(name_len, '\0');
    read_bytes(is, name.data(), name_len);
    require(name == g.name, ErrorCode::invalid_shape,
            "checkpoint group '" + name + "' does not match model group '" + g.name + "'");
    const int trainable = is.get();
    require(trainable == 0 || trainable == 1, ErrorCode::truncated_file,
            "unexpected end of checkpoint");
    const std::uint32_t count = read_u32(is);
    require(count == g.tensors.size(), ErrorCode::invalid_shape,
            "checkpoint group '" + name + "' holds " + std::to_string(count) +
                " tensors, expected " + std::to_string(g.tensors.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t nlen = read_u16(is);
        std::string tname(nlen, '\0');
        read_bytes(is, tname.data(), nlen);
        require(tname == names[i], ErrorCode::invalid_shape,
                "checkpoint tensor '" + tname + "' does not match expected '" + names[i] +
                    "'");
        const std::uint32_t rows = read_u32(is);
        const std::uint32_t cols = read_u32(is);
        require(rows == g.tensors[i]->value.rows && cols == g.tensors[i]->value.cols,
                ErrorCode::invalid_shape, "checkpoint tensor '" + tname + "' has shape " +
                                              std::to_string(rows) + "x" +
                                              std::to_string(cols));
        for (auto &v : g.tensors[i]->value.v)
            v = double(read_f32(is));
    }
    g.set_trainable(trainable == 1);
}

} // namespace detail

inline void save_checkpoint(const ModelState &m, const std::string &path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(bool(os), ErrorCode::io_failure, "cannot open for writing: " + path);
    os.write(kCheckpointMagic, 4);
    detail::write_u16(os, kCheckpointVersion);
    const std::string cfg = nlohmann::json(m.config).dump();
    detail::write_u32(os, std::uint32_t(cfg.size()));
    os.write(cfg.data(), std::streamsize(cfg.size()));
    os.put(2); // group count
    detail::write_group(os, m.encoder, m.encoder_names);
    detail::write_group(os, m.decoder, m.decoder_names);
    os.flush();
    require(bool(os), ErrorCode::io_failure, "write failed: " + path);
}

inline ModelState load_checkpoint(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorCode::io_failure, "cannot open for reading: " + path);
    char magic[4];
    detail::read_bytes(is, magic, 4);
    require(std::memcmp(magic, kCheckpointMagic, 4) == 0, ErrorCode::bad_magic,
            "not a WNN1 checkpoint: " + path);
    const std::uint16_t version = detail::read_u16(is);
    require(version == kCheckpointVersion, ErrorCode::version_mismatch,
            "unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t cfg_len = detail::read_u32(is);
    std::string cfg_text(cfg_len, '\0');
    detail::read_bytes(is, cfg_text.data(), cfg_len);
    ModelConfig cfg;
    try {
        cfg = nlohmann::json::parse(cfg_text).get<ModelConfig>();
    } catch (const nlohmann::json::exception &e) {
        throw_error(ErrorCode::truncated_file,
                    std::string("malformed checkpoint config: ") + e.what());
    }
    ModelState m = init_model(cfg, 0);
    const int n_groups = is.get();
    require(n_groups == 2, ErrorCode::invalid_shape,
            "checkpoint must hold exactly the encoder and decoder groups");
    detail::read_group(is, m.encoder, m.encoder_names);
    detail::read_group(is, m.decoder, m.decoder_names);
    return m;
}

} // namespace wch::mae

#endif
