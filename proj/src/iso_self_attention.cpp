// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/iso_self_attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace isoattn {

namespace {

void check_alignment(const ConcatLayout& layout, size_t tokens, size_t masks,
                     size_t reweights) {
    if (layout.entries.size() != masks || (tokens != 0 && layout.entries.size() != tokens) ||
        layout.entries.size() != reweights) {
        throw std::invalid_argument(
            "iso_self_attention: layout entries, masks and reweights must align");
    }
}

}  // namespace

Matrix build_isolation_mask(const ConcatLayout& layout,
                            std::span<const CharacterMask* const> masks) {
    check_alignment(layout, 0, masks.size(), masks.size());
    const int image = layout.image_token_count;
    Matrix out(image, layout.total_columns());
    for (size_t e = 0; e < layout.entries.size(); ++e) {
        const auto& entry = layout.entries[e];
        const CharacterMask& mask = *masks[e];
        if (mask.character_id != entry.character_id) {
            throw std::invalid_argument("build_isolation_mask: mask for character " +
                                        std::to_string(mask.character_id) +
                                        " does not match layout entry " +
                                        std::to_string(entry.character_id));
        }
        if (static_cast<int>(mask.bits.size()) != image) {
            throw std::invalid_argument(
                "build_isolation_mask: mask resolution does not match image tokens");
        }
        for (int r = 0; r < image; ++r) {
            if (mask.bits[r]) {
                continue;
            }
            float* row = out.data.data() + static_cast<size_t>(r) * out.cols;
            for (int c = entry.offset; c < entry.offset + entry.count; ++c) {
                row[c] = kNegInf;
            }
        }
    }
    return out;
}

ReweightVector normalize_cross_map(int character_id, std::span<const float> raw_map) {
    if (raw_map.empty()) {
        throw std::invalid_argument("normalize_cross_map: empty map");
    }
    float mx = 0.0f;
    for (float v : raw_map) {
        if (!std::isfinite(v) || v < 0.0f) {
            throw std::invalid_argument("normalize_cross_map: map entries must be finite and >= 0");
        }
        mx = std::max(mx, v);
    }
    ReweightVector rw;
    rw.character_id = character_id;
    rw.values.assign(raw_map.size(), 0.0f);
    if (mx == 0.0f) {
        return rw;
    }
    std::vector<float> sorted(raw_map.begin(), raw_map.end());
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    const float median =
        (n % 2 == 1) ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) * 0.5f;
    for (size_t i = 0; i < n; ++i) {
        const float v = (raw_map[i] - median) / mx;
        rw.values[i] = std::clamp(v, 0.0f, 1.0f);
    }
    return rw;
}

int reweight_rows(Matrix& weights, const CharacterMask& mask, const ReweightVector& rw,
                  const ConcatLayout& layout) {
    const int image = layout.image_token_count;
    if (weights.rows != image || weights.cols != layout.total_columns()) {
        throw std::invalid_argument("reweight_rows: weights shape does not match layout");
    }
    if (static_cast<int>(mask.bits.size()) != image ||
        static_cast<int>(rw.values.size()) != image) {
        throw std::invalid_argument("reweight_rows: mask/reweight resolution mismatch");
    }
    for (float v : rw.values) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw std::invalid_argument("reweight_rows: reweight values must lie in [0, 1]");
        }
    }
    int skipped = 0;
    std::vector<float> saved(static_cast<size_t>(weights.cols));
    for (int r = 0; r < image; ++r) {
        if (!mask.bits[r]) {
            continue;
        }
        auto row = weights.row(r);
        std::copy(row.begin(), row.end(), saved.begin());
        double total_before = 0.0;
        for (float v : row) {
            total_before += v;
        }
        for (int c = 0; c < image; ++c) {
            row[c] *= rw.values[c];
        }
        double total_after = 0.0;
        for (float v : row) {
            total_after += v;
        }
        if (total_after == 0.0) {
            std::copy(saved.begin(), saved.end(), row.begin());
            ++skipped;
            continue;
        }
        // Restore the row's original mass instead of forcing an exact 1;
        // an all-ones reweight then leaves the row bit-identical.
        const double restore = total_before / total_after;
        for (float& v : row) {
            v = static_cast<float>(v * restore);
        }
    }
    return skipped;
}

IsoSelfAttention isolated_self_attention(const Matrix& input_rows, const AttnProjections& proj,
                                         std::span<const Matrix* const> reference_tokens,
                                         const ConcatLayout& layout,
                                         std::span<const CharacterMask* const> masks,
                                         std::span<const ReweightVector* const> reweights) {
    check_alignment(layout, reference_tokens.size(), masks.size(), reweights.size());
    if (layout.image_token_count != input_rows.rows) {
        throw std::invalid_argument(
            "iso_self_attention: layout image token count does not match input rows");
    }

    const Matrix q = matmul(input_rows, proj.wq);
    IsoSelfAttention result;

    if (layout.entries.empty()) {
        // No references: identical operation sequence to vanilla attention.
        const Matrix k = matmul(input_rows, proj.wk);
        const Matrix v = matmul(input_rows, proj.wv);
        AttentionTensors t = scaled_dot_attention(q, k, v, nullptr);
        result.weights_pre_reweight = t.weights;
        result.weights = std::move(t.weights);
        result.output = std::move(t.output);
        return result;
    }

    Matrix concat(layout.total_columns(), input_rows.cols);
    for (int r = 0; r < input_rows.rows; ++r) {
        std::copy(input_rows.row(r).begin(), input_rows.row(r).end(), concat.row(r).begin());
    }
    for (size_t e = 0; e < layout.entries.size(); ++e) {
        const auto& entry = layout.entries[e];
        const Matrix& tokens = *reference_tokens[e];
        if (tokens.rows != entry.count || tokens.cols != input_rows.cols) {
            throw std::invalid_argument(
                "iso_self_attention: reference token shape does not match layout");
        }
        for (int r = 0; r < tokens.rows; ++r) {
            std::copy(tokens.row(r).begin(), tokens.row(r).end(),
                      concat.row(entry.offset + r).begin());
        }
    }

    const Matrix k = matmul(concat, proj.wk);
    const Matrix v = matmul(concat, proj.wv);
    const Matrix iso_mask = build_isolation_mask(layout, masks);
    AttentionTensors t = scaled_dot_attention(q, k, v, &iso_mask);

    result.weights_pre_reweight = t.weights;
    result.weights = std::move(t.weights);
    for (size_t e = 0; e < layout.entries.size(); ++e) {
        if (reweights[e] == nullptr) {
            continue;
        }
        result.reweight_rows_skipped +=
            reweight_rows(result.weights, *masks[e], *reweights[e], layout);
    }
    result.output = matmul(result.weights, v);
    return result;
}

}  // namespace isoattn
