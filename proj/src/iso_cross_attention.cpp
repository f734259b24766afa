// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/iso_cross_attention.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace isoattn {

CrossAttention cross_attention(const Matrix& input_rows, const Matrix& prompt_embedding,
                               const AttnProjections& proj) {
    const Matrix q = matmul(input_rows, proj.wq);
    const Matrix k = matmul(prompt_embedding, proj.wk);
    const Matrix v = matmul(prompt_embedding, proj.wv);
    AttentionTensors t = scaled_dot_attention(q, k, v, nullptr);
    return {std::move(t.output), std::move(t.weights)};
}

Matrix regional_blend(const Matrix& global_features,
                      std::span<const CharacterMask* const> masks,
                      std::span<const Matrix* const> character_features) {
    if (masks.size() != character_features.size()) {
        throw std::invalid_argument("regional_blend: masks and features must align");
    }
    const int rows = global_features.rows;
    std::vector<int> owner(static_cast<size_t>(rows), -1);
    for (size_t i = 0; i < masks.size(); ++i) {
        const CharacterMask& mask = *masks[i];
        if (static_cast<int>(mask.bits.size()) != rows) {
            throw std::invalid_argument("regional_blend: mask resolution mismatch");
        }
        if (!character_features[i]->same_shape(global_features)) {
            throw std::invalid_argument("regional_blend: feature shape mismatch");
        }
        for (int r = 0; r < rows; ++r) {
            if (!mask.bits[r]) {
                continue;
            }
            if (owner[r] >= 0) {
                throw std::invalid_argument("regional_blend: masks overlap at row " +
                                            std::to_string(r));
            }
            owner[r] = static_cast<int>(i);
        }
    }
    Matrix out = global_features;
    for (int r = 0; r < rows; ++r) {
        if (owner[r] < 0) {
            continue;
        }
        const auto src = character_features[owner[r]]->row(r);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

std::vector<float> character_map_extract(const Matrix& weights, TokenSpan span) {
    if (span.len <= 0) {
        throw std::invalid_argument("character_map_extract: empty span");
    }
    if (span.start < 0 || span.start + span.len > weights.cols) {
        throw std::invalid_argument("character_map_extract: span [" +
                                    std::to_string(span.start) + ", " +
                                    std::to_string(span.start + span.len) +
                                    ") outside prompt length " + std::to_string(weights.cols));
    }
    std::vector<float> map(static_cast<size_t>(weights.rows));
    const float inv_len = 1.0f / static_cast<float>(span.len);
    for (int r = 0; r < weights.rows; ++r) {
        const auto row = weights.row(r);
        float sum = 0.0f;
        for (int c = span.start; c < span.start + span.len; ++c) {
            sum += row[c];
        }
        map[r] = sum * inv_len;
    }
    return map;
}

}  // namespace isoattn
