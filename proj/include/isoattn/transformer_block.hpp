// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "isoattn/iso_self_attention.hpp"
#include "isoattn/mask.hpp"
#include "isoattn/matrix.hpp"
#include "isoattn/plan.hpp"
#include "isoattn/reference_bank.hpp"

namespace isoattn {

struct LayerNormParams {
    std::vector<float> gamma;
    std::vector<float> beta;
};

/// Pre-norm Transformer block: self-attention, cross-attention, feed-forward,
/// each behind a residual connection. The extended branch reuses these exact
/// weights.
struct BlockParams {
    int block_key = 0;
    AttnProjections self_attn;   // d x d each
    AttnProjections cross_attn;  // wq: d x d, wk/wv: d_txt x d
    Matrix ff_in;                // d x d_ff
    Matrix ff_out;               // d_ff x d
    LayerNormParams norm_self;
    LayerNormParams norm_cross;
    LayerNormParams norm_ff;
};

/// Weights are a pure function of (seed, block_key), so baseline and extended
/// configurations see identical parameters.
BlockParams make_block_params(uint64_t seed, int block_key, int d, int d_txt, int d_ff);

Matrix layer_norm_rows(const Matrix& x, const LayerNormParams& p);

struct ExtendedBlockConfig {
    float lambda = 1.1f;
    bool extended_enabled = true;
    bool iso_self_enabled = true;
    bool iso_cross_enabled = true;
    bool reweight_enabled = true;
};

struct OriginalBranch {
    Matrix output;  // block output
    std::map<int, std::vector<float>> character_maps;
    Matrix cross_weights;  // (h*w) x L over the scene prompt
};

OriginalBranch run_original_branch(const Matrix& input, const Matrix& scene_embedding,
                                   const BlockParams& params,
                                   const std::map<int, TokenSpan>& name_spans);

/// Everything the extended branch needs about the scene's reappearing
/// characters, aligned over ascending character id.
struct IsolationInputs {
    std::vector<int> character_ids;
    std::vector<const Matrix*> reference_tokens;  // raw stored rows; empty => no references
    ConcatLayout layout;                          // meaningful when reference_tokens set
    std::vector<const CharacterMask*> masks;          // current-scene masks
    std::vector<const ReweightVector*> reweights;     // nullptr entries skip re-weighting
    std::vector<const Matrix*> character_embeddings;  // encoded character prompts
};

struct ExtendedBranch {
    Matrix output;
    Matrix iso_self_weights_pre;  // empty unless isolated self-attention ran
    Matrix iso_self_weights;
    Matrix global_cross_weights;
    std::vector<std::pair<int, Matrix>> character_cross_weights;
    int reweight_rows_skipped = 0;
};

ExtendedBranch run_extended_branch(const Matrix& input, const Matrix& scene_embedding,
                                   const IsolationInputs& iso, const BlockParams& params,
                                   const ExtendedBlockConfig& config);

/// F = isolated * lambda + original * (1 - lambda), computed in residual form
/// so merging a branch with itself is exact for any lambda.
Matrix merge_branches(const Matrix& original, const Matrix& isolated, float lambda);

}  // namespace isoattn
