// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace isoattn {

inline constexpr float kNegInf = -std::numeric_limits<float>::infinity();

/// Dense row-major float32 matrix. Every reduction over it runs in a fixed
/// left-to-right order, so identical inputs give bit-identical outputs.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(int rows_, int cols_);

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    std::span<float> row(int r) {
        return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }
    std::span<const float> row(int r) const {
        return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }

    static Matrix identity(int n);
};

/// Bitwise equality (shape plus raw float bytes).
bool bit_equal(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);

/// Row softmax with -inf sentinels mapping to exactly zero weight.
/// Throws if any row is entirely -inf.
Matrix softmax_rows(const Matrix& scores);

struct AttnProjections {
    Matrix wq, wk, wv;
};

struct AttentionTensors {
    Matrix q, k, v;
    Matrix scores;   // scaled logits, additive mask already applied
    Matrix weights;  // row-stochastic
    Matrix output;   // weights * v
};

/// Scaled dot-product attention. additive_mask (optional, q.rows x k.rows)
/// may hold -inf sentinels to forbid key columns.
AttentionTensors scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                      const Matrix* additive_mask = nullptr);

void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

}  // namespace isoattn
