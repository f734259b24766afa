// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "isoattn/mask.hpp"
#include "isoattn/matrix.hpp"
#include "isoattn/reference_bank.hpp"

namespace isoattn {

/// Per-image-token scaling factors in [0, 1] derived from a character's
/// cross-attention map; zero at and below the map's median.
struct ReweightVector {
    int character_id = -1;
    std::vector<float> values;  // h*w
};

/// Additive attention mask of shape (h*w) x (h*w + sum n_m). Image columns
/// are free; the reference columns of character m are reachable only from
/// rows where that character's mask is 1 (all -inf for a degenerate mask).
Matrix build_isolation_mask(const ConcatLayout& layout,
                            std::span<const CharacterMask* const> masks);

/// out = clip((x - median(x)) / max(x), 0, 1); all zeros when max(x) == 0.
ReweightVector normalize_cross_map(int character_id, std::span<const float> raw_map);

/// For each row where mask bit is 1: scale the image columns by rw, then
/// rescale the whole row so its total mass is unchanged. Rows whose scaled
/// mass would be zero are left untouched; returns how many were skipped.
int reweight_rows(Matrix& weights, const CharacterMask& mask, const ReweightVector& rw,
                  const ConcatLayout& layout);

struct IsoSelfAttention {
    Matrix output;                // (h*w) x d
    Matrix weights_pre_reweight;  // row-stochastic, isolation mask applied
    Matrix weights;               // after re-weighting (same object if none applied)
    int reweight_rows_skipped = 0;
};

/// Extended self-attention: K/V come from Concat(input, reference tokens...),
/// queries from the image tokens only; isolation masking, softmax, then
/// per-character re-weighting. `reference_tokens`, `masks` and `reweights`
/// align with layout.entries (ascending character id); a null reweight skips
/// that character.
IsoSelfAttention isolated_self_attention(const Matrix& input_rows, const AttnProjections& proj,
                                         std::span<const Matrix* const> reference_tokens,
                                         const ConcatLayout& layout,
                                         std::span<const CharacterMask* const> masks,
                                         std::span<const ReweightVector* const> reweights);

}  // namespace isoattn
