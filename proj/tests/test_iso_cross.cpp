// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <vector>

#include "isoattn/iso_cross_attention.hpp"
#include "isoattn/rng.hpp"
#include "oracles.hpp"

using namespace isoattn;

namespace {

CharacterMask make_mask(int id, std::vector<uint8_t> bits) {
    CharacterMask mask;
    mask.character_id = id;
    mask.h = 1;
    mask.w = static_cast<int>(bits.size());
    mask.bits = std::move(bits);
    return mask;
}

AttnProjections random_cross_proj(Rng& rng, int d, int d_txt) {
    const float sd = 1.0f / std::sqrt(static_cast<float>(d));
    const float st = 1.0f / std::sqrt(static_cast<float>(d_txt));
    return {oracle::random_matrix(rng, d, d, sd), oracle::random_matrix(rng, d_txt, d, st),
            oracle::random_matrix(rng, d_txt, d, st)};
}

}  // namespace

TEST_CASE("single prompt token takes all the attention") {
    Rng rng(1);
    const int d = 6, d_txt = 4;
    const Matrix input = oracle::random_matrix(rng, 5, d);
    const Matrix prompt = oracle::random_matrix(rng, 1, d_txt);
    const AttnProjections proj = random_cross_proj(rng, d, d_txt);
    const CrossAttention result = cross_attention(input, prompt, proj);
    REQUIRE(result.weights.cols == 1);
    for (int r = 0; r < 5; ++r) {
        CHECK(result.weights.at(r, 0) == 1.0f);
    }
    const Matrix value_row = matmul(prompt, proj.wv);
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < d; ++c) {
            CHECK(result.features.at(r, c) == value_row.at(0, c));
        }
    }
}

TEST_CASE("two identical prompt tokens split the attention evenly") {
    Rng rng(2);
    const int d = 6, d_txt = 4;
    const Matrix input = oracle::random_matrix(rng, 5, d);
    Matrix prompt(2, d_txt);
    for (int c = 0; c < d_txt; ++c) {
        prompt.at(0, c) = prompt.at(1, c) = rng.next_normal();
    }
    const CrossAttention result =
        cross_attention(input, prompt, random_cross_proj(rng, d, d_txt));
    for (int r = 0; r < 5; ++r) {
        CHECK(result.weights.at(r, 0) == 0.5f);
        CHECK(result.weights.at(r, 1) == 0.5f);
    }
}

TEST_CASE("cross attention matches the 64-bit oracle") {
    Rng rng(3);
    const int d = 8, d_txt = 5;
    const Matrix input = oracle::random_matrix(rng, 7, d);
    const Matrix prompt = oracle::random_matrix(rng, 4, d_txt);
    const AttnProjections proj = random_cross_proj(rng, d, d_txt);
    const CrossAttention got = cross_attention(input, prompt, proj);
    const oracle::DAttention want = oracle::dscaled_dot_attention(
        oracle::dmatmul(oracle::from(input), oracle::from(proj.wq)),
        oracle::dmatmul(oracle::from(prompt), oracle::from(proj.wk)),
        oracle::dmatmul(oracle::from(prompt), oracle::from(proj.wv)));
    CHECK(oracle::max_abs_diff(got.weights.data, want.weights.data) < 1e-5);
    CHECK(oracle::max_abs_diff(got.features.data, want.output.data) < 1e-5);
}

TEST_CASE("regional blend partitions rows") {
    Rng rng(4);
    const Matrix global = oracle::random_matrix(rng, 4, 3);
    const Matrix region = oracle::random_matrix(rng, 4, 3);
    const CharacterMask mask = make_mask(0, {0, 1, 1, 0});
    const CharacterMask* masks[] = {&mask};
    const Matrix* features[] = {&region};
    const Matrix blended = regional_blend(global, masks, features);
    for (int c = 0; c < 3; ++c) {
        CHECK(blended.at(0, c) == global.at(0, c));
        CHECK(blended.at(1, c) == region.at(1, c));
        CHECK(blended.at(2, c) == region.at(2, c));
        CHECK(blended.at(3, c) == global.at(3, c));
    }
}

TEST_CASE("regional blend with no masks returns the global features bit-exactly") {
    Rng rng(5);
    const Matrix global = oracle::random_matrix(rng, 4, 3);
    CHECK(bit_equal(regional_blend(global, {}, {}), global));

    const CharacterMask empty = make_mask(0, {0, 0, 0, 0});
    const Matrix region = oracle::random_matrix(rng, 4, 3);
    const CharacterMask* masks[] = {&empty};
    const Matrix* features[] = {&region};
    CHECK(bit_equal(regional_blend(global, masks, features), global));
}

TEST_CASE("regional blend matches the per-row oracle and is idempotent") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const int rows = 8;
        const Matrix global = oracle::random_matrix(rng, rows, 5);
        const Matrix fa = oracle::random_matrix(rng, rows, 5);
        const Matrix fb = oracle::random_matrix(rng, rows, 5);
        std::vector<uint8_t> bits_a(rows), bits_b(rows);
        for (int i = 0; i < rows; ++i) {
            const int owner = static_cast<int>(rng.next_u64() % 3);
            bits_a[i] = owner == 0;
            bits_b[i] = owner == 1;
        }
        const CharacterMask ma = make_mask(0, bits_a);
        const CharacterMask mb = make_mask(1, bits_b);
        const CharacterMask* masks[] = {&ma, &mb};
        const Matrix* features[] = {&fa, &fb};
        const Matrix blended = regional_blend(global, masks, features);

        const oracle::DMatrix dg = oracle::from(global);
        const oracle::DMatrix da = oracle::from(fa);
        const oracle::DMatrix db = oracle::from(fb);
        const oracle::DMatrix* dfeatures[] = {&da, &db};
        const oracle::DMatrix want = oracle::dregional_blend(dg, masks, dfeatures);
        for (size_t i = 0; i < blended.data.size(); ++i) {
            CHECK(static_cast<double>(blended.data[i]) == want.data[i]);
        }

        // every row comes verbatim from exactly one source
        for (int r = 0; r < rows; ++r) {
            const Matrix& source = bits_a[r] ? fa : (bits_b[r] ? fb : global);
            for (int c = 0; c < 5; ++c) {
                CHECK(blended.at(r, c) == source.at(r, c));
            }
        }

        CHECK(bit_equal(regional_blend(blended, masks, features),
                        regional_blend(blended, masks, features)));
    }
}

TEST_CASE("regional blend rejects overlapping masks") {
    Rng rng(7);
    const Matrix global = oracle::random_matrix(rng, 4, 3);
    const Matrix region = oracle::random_matrix(rng, 4, 3);
    const CharacterMask ma = make_mask(0, {1, 1, 0, 0});
    const CharacterMask mb = make_mask(1, {0, 1, 0, 0});
    const CharacterMask* masks[] = {&ma, &mb};
    const Matrix* features[] = {&region, &region};
    CHECK_THROWS_AS(regional_blend(global, masks, features), std::invalid_argument);
}

TEST_CASE("character map extraction") {
    Rng rng(8);
    Matrix weights = softmax_rows(oracle::random_matrix(rng, 6, 5, 2.0f));

    SUBCASE("length-1 span is the column verbatim") {
        const auto map = character_map_extract(weights, {2, 1});
        for (int r = 0; r < 6; ++r) {
            CHECK(map[r] == weights.at(r, 2));
        }
    }
    SUBCASE("full span of a stochastic matrix is 1/L") {
        const auto map = character_map_extract(weights, {0, 5});
        for (float v : map) {
            CHECK(v == doctest::Approx(0.2f).epsilon(1e-6));
        }
    }
    SUBCASE("length-2 span matches the column-mean oracle") {
        const auto map = character_map_extract(weights, {1, 2});
        for (int r = 0; r < 6; ++r) {
            const double want = (static_cast<double>(weights.at(r, 1)) + weights.at(r, 2)) / 2.0;
            CHECK(map[r] == doctest::Approx(want).epsilon(1e-6));
        }
    }
    SUBCASE("bad spans are rejected") {
        CHECK_THROWS_AS(character_map_extract(weights, {2, 0}), std::invalid_argument);
        CHECK_THROWS_AS(character_map_extract(weights, {4, 2}), std::invalid_argument);
        CHECK_THROWS_AS(character_map_extract(weights, {-1, 2}), std::invalid_argument);
    }
}
