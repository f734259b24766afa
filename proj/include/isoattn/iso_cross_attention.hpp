// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "isoattn/mask.hpp"
#include "isoattn/matrix.hpp"
#include "isoattn/plan.hpp"

namespace isoattn {

struct CrossAttention {
    Matrix features;  // (h*w) x d
    Matrix weights;   // (h*w) x L, row-stochastic
};

/// Queries from the image tokens, keys/values from the prompt embedding.
/// The weights are returned because they drive mask generation.
CrossAttention cross_attention(const Matrix& input_rows, const Matrix& prompt_embedding,
                               const AttnProjections& proj);

/// Row-wise composition: rows claimed by a (disjoint) mask take that
/// character's features, every other row takes the global features. Copies
/// are bit-exact.
Matrix regional_blend(const Matrix& global_features,
                      std::span<const CharacterMask* const> masks,
                      std::span<const Matrix* const> character_features);

/// Mean of the attention weights over the span's token columns, per spatial
/// position.
std::vector<float> character_map_extract(const Matrix& weights, TokenSpan span);

}  // namespace isoattn
