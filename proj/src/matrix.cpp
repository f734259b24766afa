// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/matrix.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace isoattn {

namespace {

constexpr char kMatrixMagic[8] = {'I', 'S', 'O', 'L', 'A', 'T', '0', '1'};

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) +
                                "x" + std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                "x" + std::to_string(b.cols) + ")");
}

}  // namespace

Matrix::Matrix(int rows_, int cols_) : rows(rows_), cols(cols_) {
    if (rows_ <= 0 || cols_ <= 0) {
        throw std::invalid_argument("Matrix: dimensions must be positive");
    }
    data.assign(static_cast<size_t>(rows_) * cols_, 0.0f);
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) {
        m.at(i, i) = 1.0f;
    }
    return m;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        return false;
    }
    if (a.data.empty()) {
        return true;
    }
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        shape_error("matmul", a, b);
    }
    Matrix out(a.rows, b.cols);
    // i-k-j order streams b row-wise; per output cell the accumulation is
    // still k-ascending, which keeps results bit-stable.
    for (int i = 0; i < a.rows; ++i) {
        float* out_row = out.data.data() + static_cast<size_t>(i) * out.cols;
        const float* a_row = a.data.data() + static_cast<size_t>(i) * a.cols;
        for (int k = 0; k < a.cols; ++k) {
            const float aik = a_row[k];
            const float* b_row = b.data.data() + static_cast<size_t>(k) * b.cols;
            for (int j = 0; j < b.cols; ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        shape_error("add", a, b);
    }
    Matrix out(a.rows, a.cols);
    for (size_t i = 0; i < a.data.size(); ++i) {
        out.data[i] = a.data[i] + b.data[i];
    }
    return out;
}

Matrix softmax_rows(const Matrix& scores) {
    Matrix out(scores.rows, scores.cols);
    for (int r = 0; r < scores.rows; ++r) {
        const auto in_row = scores.row(r);
        auto out_row = out.row(r);
        float mx = kNegInf;
        for (float v : in_row) {
            if (v > mx) {
                mx = v;
            }
        }
        if (mx == kNegInf) {
            throw std::domain_error("softmax_rows: row " + std::to_string(r) +
                                    " is entirely -inf");
        }
        // The normalizer accumulates in double so wide rows still sum to
        // 1 within 1e-6 after the float divisions.
        double sum = 0.0;
        for (int c = 0; c < scores.cols; ++c) {
            const float e = std::exp(in_row[c] - mx);  // exp(-inf) == 0 exactly
            out_row[c] = e;
            sum += e;
        }
        for (int c = 0; c < scores.cols; ++c) {
            out_row[c] = static_cast<float>(out_row[c] / sum);
        }
    }
    return out;
}

AttentionTensors scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                      const Matrix* additive_mask) {
    if (q.cols != k.cols) {
        shape_error("scaled_dot_attention (q vs k)", q, k);
    }
    if (k.rows != v.rows) {
        shape_error("scaled_dot_attention (k vs v)", k, v);
    }
    if (additive_mask != nullptr &&
        (additive_mask->rows != q.rows || additive_mask->cols != k.rows)) {
        shape_error("scaled_dot_attention (mask)", q, *additive_mask);
    }
    const float scale = 1.0f / std::sqrt(static_cast<float>(q.cols));
    Matrix scores(q.rows, k.rows);
    for (int i = 0; i < q.rows; ++i) {
        const float* q_row = q.data.data() + static_cast<size_t>(i) * q.cols;
        for (int j = 0; j < k.rows; ++j) {
            const float* k_row = k.data.data() + static_cast<size_t>(j) * k.cols;
            float dot = 0.0f;
            for (int c = 0; c < q.cols; ++c) {
                dot += q_row[c] * k_row[c];
            }
            const float logit = dot * scale;
            scores.at(i, j) = additive_mask ? logit + additive_mask->at(i, j) : logit;
        }
    }
    AttentionTensors t;
    t.q = q;
    t.k = k;
    t.v = v;
    t.scores = std::move(scores);
    t.weights = softmax_rows(t.scores);
    t.output = matmul(t.weights, v);
    return t;
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("save_matrix: cannot open " + path.string());
    }
    f.write(kMatrixMagic, sizeof(kMatrixMagic));
    const int32_t dims[2] = {m.rows, m.cols};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    f.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    if (!f) {
        throw std::runtime_error("save_matrix: write failed for " + path.string());
    }
}

Matrix load_matrix(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("load_matrix: cannot open " + path.string());
    }
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMatrixMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("load_matrix: bad magic in " + path.string());
    }
    int32_t dims[2];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!f || dims[0] <= 0 || dims[1] <= 0) {
        throw std::runtime_error("load_matrix: bad header in " + path.string());
    }
    Matrix m(dims[0], dims[1]);
    f.read(reinterpret_cast<char*>(m.data.data()),
           static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    if (!f) {
        throw std::runtime_error("load_matrix: truncated data in " + path.string());
    }
    return m;
}

}  // namespace isoattn
