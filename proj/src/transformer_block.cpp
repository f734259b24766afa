// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/transformer_block.hpp"

#include <cmath>
#include <stdexcept>

#include "isoattn/iso_cross_attention.hpp"
#include "isoattn/rng.hpp"

namespace isoattn {

namespace {

constexpr float kLayerNormEps = 1e-5f;

enum TensorTag : uint64_t {
    kSelfQ = 1,
    kSelfK,
    kSelfV,
    kCrossQ,
    kCrossK,
    kCrossV,
    kFfIn,
    kFfOut,
};

Matrix gaussian_matrix(uint64_t seed, int block_key, TensorTag tag, int rows, int cols) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(block_key) + 1, tag));
    Matrix m(rows, cols);
    const float scale = 1.0f / std::sqrt(static_cast<float>(rows));
    for (float& v : m.data) {
        v = rng.next_normal() * scale;
    }
    return m;
}

Matrix feed_forward(const Matrix& x, const BlockParams& params) {
    Matrix hidden = matmul(x, params.ff_in);
    // tanh keeps the hidden activations zero-centered; a one-sided activation
    // would push a shared offset into every latent row, washing out the
    // feature differences the consistency metric measures.
    for (float& v : hidden.data) {
        v = std::tanh(v);
    }
    return matmul(hidden, params.ff_out);
}

}  // namespace

BlockParams make_block_params(uint64_t seed, int block_key, int d, int d_txt, int d_ff) {
    BlockParams p;
    p.block_key = block_key;
    p.self_attn.wq = gaussian_matrix(seed, block_key, kSelfQ, d, d);
    p.self_attn.wk = gaussian_matrix(seed, block_key, kSelfK, d, d);
    p.self_attn.wv = gaussian_matrix(seed, block_key, kSelfV, d, d);
    p.cross_attn.wq = gaussian_matrix(seed, block_key, kCrossQ, d, d);
    p.cross_attn.wk = gaussian_matrix(seed, block_key, kCrossK, d_txt, d);
    p.cross_attn.wv = gaussian_matrix(seed, block_key, kCrossV, d_txt, d);
    p.ff_in = gaussian_matrix(seed, block_key, kFfIn, d, d_ff);
    p.ff_out = gaussian_matrix(seed, block_key, kFfOut, d_ff, d);
    p.norm_self.gamma.assign(static_cast<size_t>(d), 1.0f);
    p.norm_self.beta.assign(static_cast<size_t>(d), 0.0f);
    p.norm_cross = p.norm_self;
    p.norm_ff = p.norm_self;
    return p;
}

Matrix layer_norm_rows(const Matrix& x, const LayerNormParams& p) {
    if (p.gamma.size() != static_cast<size_t>(x.cols) || p.beta.size() != p.gamma.size()) {
        throw std::invalid_argument("layer_norm_rows: parameter width mismatch");
    }
    Matrix out(x.rows, x.cols);
    for (int r = 0; r < x.rows; ++r) {
        const auto in = x.row(r);
        auto o = out.row(r);
        float mean = 0.0f;
        for (float v : in) {
            mean += v;
        }
        mean /= static_cast<float>(x.cols);
        float var = 0.0f;
        for (float v : in) {
            const float d = v - mean;
            var += d * d;
        }
        var /= static_cast<float>(x.cols);
        const float inv_std = 1.0f / std::sqrt(var + kLayerNormEps);
        for (int c = 0; c < x.cols; ++c) {
            o[c] = (in[c] - mean) * inv_std * p.gamma[c] + p.beta[c];
        }
    }
    return out;
}

OriginalBranch run_original_branch(const Matrix& input, const Matrix& scene_embedding,
                                   const BlockParams& params,
                                   const std::map<int, TokenSpan>& name_spans) {
    const Matrix normed = layer_norm_rows(input, params.norm_self);
    AttentionTensors self = scaled_dot_attention(matmul(normed, params.self_attn.wq),
                                                 matmul(normed, params.self_attn.wk),
                                                 matmul(normed, params.self_attn.wv));
    const Matrix x1 = add(input, self.output);

    const Matrix normed_cross = layer_norm_rows(x1, params.norm_cross);
    CrossAttention cross = cross_attention(normed_cross, scene_embedding, params.cross_attn);
    const Matrix x2 = add(x1, cross.features);

    OriginalBranch result;
    for (const auto& [id, span] : name_spans) {
        result.character_maps[id] = character_map_extract(cross.weights, span);
    }
    result.cross_weights = std::move(cross.weights);

    const Matrix normed_ff = layer_norm_rows(x2, params.norm_ff);
    result.output = add(x2, feed_forward(normed_ff, params));
    return result;
}

ExtendedBranch run_extended_branch(const Matrix& input, const Matrix& scene_embedding,
                                   const IsolationInputs& iso, const BlockParams& params,
                                   const ExtendedBlockConfig& config) {
    ExtendedBranch result;

    // Self-attention stage.
    const Matrix normed = layer_norm_rows(input, params.norm_self);
    Matrix x1;
    const bool use_references = config.iso_self_enabled && !iso.character_ids.empty() &&
                                !iso.reference_tokens.empty();
    if (use_references) {
        // Stored rows live in the raw block-input space; normalize them the
        // way this block normalizes its own input before projecting.
        std::vector<Matrix> normed_refs;
        normed_refs.reserve(iso.reference_tokens.size());
        for (const Matrix* tokens : iso.reference_tokens) {
            normed_refs.push_back(layer_norm_rows(*tokens, params.norm_self));
        }
        std::vector<const Matrix*> ref_ptrs;
        ref_ptrs.reserve(normed_refs.size());
        for (const Matrix& m : normed_refs) {
            ref_ptrs.push_back(&m);
        }
        std::vector<const ReweightVector*> reweights(iso.masks.size(), nullptr);
        if (config.reweight_enabled) {
            reweights = iso.reweights;
        }
        IsoSelfAttention self = isolated_self_attention(normed, params.self_attn, ref_ptrs,
                                                        iso.layout, iso.masks, reweights);
        result.iso_self_weights_pre = std::move(self.weights_pre_reweight);
        result.iso_self_weights = std::move(self.weights);
        result.reweight_rows_skipped = self.reweight_rows_skipped;
        x1 = add(input, self.output);
    } else {
        AttentionTensors self = scaled_dot_attention(matmul(normed, params.self_attn.wq),
                                                     matmul(normed, params.self_attn.wk),
                                                     matmul(normed, params.self_attn.wv));
        x1 = add(input, self.output);
    }

    // Cross-attention stage.
    const Matrix normed_cross = layer_norm_rows(x1, params.norm_cross);
    CrossAttention global = cross_attention(normed_cross, scene_embedding, params.cross_attn);
    Matrix x2;
    if (config.iso_cross_enabled && !iso.character_ids.empty()) {
        std::vector<Matrix> char_features;
        char_features.reserve(iso.character_ids.size());
        for (size_t i = 0; i < iso.character_ids.size(); ++i) {
            CrossAttention per_char =
                cross_attention(normed_cross, *iso.character_embeddings[i], params.cross_attn);
            char_features.push_back(std::move(per_char.features));
            result.character_cross_weights.emplace_back(iso.character_ids[i],
                                                        std::move(per_char.weights));
        }
        std::vector<const Matrix*> feature_ptrs;
        feature_ptrs.reserve(char_features.size());
        for (const Matrix& m : char_features) {
            feature_ptrs.push_back(&m);
        }
        const Matrix blended =
            regional_blend(global.features, iso.masks, feature_ptrs);
        x2 = add(x1, blended);
    } else {
        x2 = add(x1, global.features);
    }
    result.global_cross_weights = std::move(global.weights);

    // Feed-forward stage, same weights as the original branch.
    const Matrix normed_ff = layer_norm_rows(x2, params.norm_ff);
    result.output = add(x2, feed_forward(normed_ff, params));
    return result;
}

Matrix merge_branches(const Matrix& original, const Matrix& isolated, float lambda) {
    if (!original.same_shape(isolated)) {
        throw std::invalid_argument("merge_branches: shape mismatch");
    }
    if (lambda == 0.0f) {
        return original;
    }
    if (lambda == 1.0f) {
        return isolated;
    }
    Matrix out(original.rows, original.cols);
    for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = original.data[i] + lambda * (isolated.data[i] - original.data[i]);
    }
    return out;
}

}  // namespace isoattn
