// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <vector>

#include "isoattn/iso_self_attention.hpp"
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

ConcatLayout make_layout(int image, std::vector<std::pair<int, int>> id_counts) {
    ConcatLayout layout;
    layout.image_token_count = image;
    int offset = image;
    for (auto [id, count] : id_counts) {
        layout.entries.push_back({id, offset, count});
        offset += count;
    }
    return layout;
}

AttnProjections random_proj(Rng& rng, int d) {
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    return {oracle::random_matrix(rng, d, d, scale), oracle::random_matrix(rng, d, d, scale),
            oracle::random_matrix(rng, d, d, scale)};
}

Matrix random_stochastic(Rng& rng, int rows, int cols) {
    Matrix logits = oracle::random_matrix(rng, rows, cols, 1.0f);
    return softmax_rows(logits);
}

}  // namespace

TEST_CASE("isolation mask follows the per-character rule") {
    const auto layout = make_layout(2, {{0, 2}});
    const CharacterMask mask = make_mask(0, {0, 1});
    const CharacterMask* masks[] = {&mask};
    const Matrix iso = build_isolation_mask(layout, masks);
    REQUIRE(iso.rows == 2);
    REQUIRE(iso.cols == 4);
    // image columns stay open
    CHECK(iso.at(0, 0) == 0.0f);
    CHECK(iso.at(0, 1) == 0.0f);
    // row 0 is outside the mask: reference columns blocked
    CHECK(iso.at(0, 2) == kNegInf);
    CHECK(iso.at(0, 3) == kNegInf);
    // row 1 is inside: reference columns open
    CHECK(iso.at(1, 2) == 0.0f);
    CHECK(iso.at(1, 3) == 0.0f);
}

TEST_CASE("isolation mask with no characters is all zeros") {
    const Matrix iso = build_isolation_mask(make_layout(3, {}), {});
    CHECK(iso.rows == 3);
    CHECK(iso.cols == 3);
    for (float v : iso.data) {
        CHECK(v == 0.0f);
    }
}

TEST_CASE("degenerate masks block every reference column") {
    const auto layout = make_layout(2, {{0, 1}});
    CharacterMask mask = make_mask(0, {0, 0});
    mask.degenerate = true;
    const CharacterMask* masks[] = {&mask};
    const Matrix iso = build_isolation_mask(layout, masks);
    CHECK(iso.at(0, 2) == kNegInf);
    CHECK(iso.at(1, 2) == kNegInf);
}

TEST_CASE("isolation mask matches a per-cell oracle on random instances") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const int image = 8;
        std::vector<uint8_t> bits_a(image), bits_b(image);
        for (int i = 0; i < image; ++i) {
            const int owner = static_cast<int>(rng.next_u64() % 3);
            bits_a[i] = owner == 0;
            bits_b[i] = owner == 1;
        }
        const CharacterMask a = make_mask(0, bits_a);
        const CharacterMask b = make_mask(1, bits_b);
        const auto layout = make_layout(image, {{0, 3}, {1, 2}});
        const CharacterMask* masks[] = {&a, &b};
        const Matrix got = build_isolation_mask(layout, masks);
        const oracle::DMatrix want = oracle::dbuild_isolation_mask(layout, masks);
        REQUIRE(static_cast<size_t>(got.rows) * got.cols == want.data.size());
        for (size_t i = 0; i < got.data.size(); ++i) {
            CHECK(static_cast<double>(got.data[i]) == want.data[i]);
        }
    }
}

TEST_CASE("normalize_cross_map hand values") {
    const std::vector<float> map = {0.1f, 0.2f, 0.4f, 0.8f};
    const ReweightVector rw = normalize_cross_map(5, map);
    CHECK(rw.character_id == 5);
    CHECK(rw.values[0] == doctest::Approx(0.0f));
    CHECK(rw.values[1] == doctest::Approx(0.0f));
    CHECK(rw.values[2] == doctest::Approx(0.125f).epsilon(1e-6));
    CHECK(rw.values[3] == doctest::Approx(0.625f).epsilon(1e-6));

    const ReweightVector constant = normalize_cross_map(0, std::vector<float>{0.3f, 0.3f});
    CHECK(constant.values == std::vector<float>{0.0f, 0.0f});

    const ReweightVector pair = normalize_cross_map(0, std::vector<float>{0.0f, 1.0f});
    CHECK(pair.values[0] == 0.0f);
    CHECK(pair.values[1] == doctest::Approx(0.5f).epsilon(1e-6));

    const ReweightVector zeros = normalize_cross_map(0, std::vector<float>{0.0f, 0.0f});
    CHECK(zeros.values == std::vector<float>{0.0f, 0.0f});
}

TEST_CASE("normalize_cross_map matches the 64-bit oracle") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const auto map = oracle::random_map(rng, 64);
        const ReweightVector got = normalize_cross_map(0, map);
        const auto want = oracle::dnormalize_map(map);
        CHECK(oracle::max_abs_diff(got.values, want) < 1e-6);
    }
}

TEST_CASE("reweight hand example") {
    // one masked row: [0.4, 0.3, 0.2 | 0.1], rw = [1, 0.5, 0]
    const auto layout = make_layout(3, {{0, 1}});
    Matrix weights(3, 4);
    const float row[4] = {0.4f, 0.3f, 0.2f, 0.1f};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            weights.at(r, c) = row[c];
        }
    }
    const CharacterMask mask = make_mask(0, {0, 1, 0});
    ReweightVector rw;
    rw.character_id = 0;
    rw.values = {1.0f, 0.5f, 0.0f};
    const int skipped = reweight_rows(weights, mask, rw, layout);
    CHECK(skipped == 0);
    // untouched rows
    for (int c = 0; c < 4; ++c) {
        CHECK(weights.at(0, c) == row[c]);
        CHECK(weights.at(2, c) == row[c]);
    }
    CHECK(weights.at(1, 0) == doctest::Approx(0.615385).epsilon(1e-5));
    CHECK(weights.at(1, 1) == doctest::Approx(0.230769).epsilon(1e-5));
    CHECK(weights.at(1, 2) == 0.0f);
    CHECK(weights.at(1, 3) == doctest::Approx(0.153846).epsilon(1e-5));
}

TEST_CASE("reweight identities") {
    Rng rng(12);
    const auto layout = make_layout(4, {{0, 2}});
    Matrix weights = random_stochastic(rng, 4, 6);
    const Matrix before = weights;

    SUBCASE("all-ones reweight leaves rows bit-identical") {
        ReweightVector rw;
        rw.character_id = 0;
        rw.values = {1.0f, 1.0f, 1.0f, 1.0f};
        reweight_rows(weights, make_mask(0, {1, 1, 0, 1}), rw, layout);
        CHECK(bit_equal(weights, before));
    }
    SUBCASE("empty mask leaves the matrix untouched") {
        ReweightVector rw;
        rw.character_id = 0;
        rw.values = {0.0f, 0.0f, 0.0f, 0.0f};
        reweight_rows(weights, make_mask(0, {0, 0, 0, 0}), rw, layout);
        CHECK(bit_equal(weights, before));
    }
}

TEST_CASE("reweight skips rows whose mass would vanish") {
    const auto layout = make_layout(2, {{0, 1}});
    Matrix weights(2, 3);
    // masked row has zero reference mass and rw is all zero
    weights.at(0, 0) = 0.7f;
    weights.at(0, 1) = 0.3f;
    weights.at(0, 2) = 0.0f;
    weights.at(1, 0) = 0.5f;
    weights.at(1, 1) = 0.25f;
    weights.at(1, 2) = 0.25f;
    ReweightVector rw;
    rw.character_id = 0;
    rw.values = {0.0f, 0.0f};
    const Matrix before = weights;
    const int skipped = reweight_rows(weights, make_mask(0, {1, 0}), rw, layout);
    CHECK(skipped == 1);
    CHECK(bit_equal(weights, before));
}

TEST_CASE("reweight keeps rows stochastic and never drains reference mass") {
    Rng rng(2049);
    for (int trial = 0; trial < 50; ++trial) {
        const int image = 6;
        const int refs = 3;
        const auto layout = make_layout(image, {{0, refs}});
        Matrix weights = random_stochastic(rng, image, image + refs);
        std::vector<uint8_t> bits(image);
        for (auto& b : bits) {
            b = rng.next_float() < 0.5f ? 1 : 0;
        }
        const CharacterMask mask = make_mask(0, bits);
        ReweightVector rw;
        rw.character_id = 0;
        rw.values.resize(image);
        bool any_below_one = false;
        for (auto& v : rw.values) {
            v = rng.next_float();
            any_below_one = any_below_one || v < 1.0f;
        }
        const Matrix before = weights;
        reweight_rows(weights, mask, rw, layout);
        for (int r = 0; r < image; ++r) {
            float sum = 0.0f;
            for (float v : weights.row(r)) {
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0f).epsilon(1e-5));
            if (!bits[r]) {
                continue;
            }
            float ref_before = 0.0f, ref_after = 0.0f;
            for (int c = image; c < image + refs; ++c) {
                ref_before += before.at(r, c);
                ref_after += weights.at(r, c);
            }
            CHECK(ref_after >= ref_before);
            if (any_below_one && ref_before > 0.0f) {
                CHECK(ref_after > ref_before);
            }
        }
    }
}

TEST_CASE("isolated self-attention with no references reduces to vanilla") {
    Rng rng(404);
    const int d = 8;
    const Matrix input = oracle::random_matrix(rng, 6, d);
    const AttnProjections proj = random_proj(rng, d);
    const IsoSelfAttention iso = isolated_self_attention(
        input, proj, {}, make_layout(6, {}), {}, {});
    const AttentionTensors vanilla = scaled_dot_attention(
        matmul(input, proj.wq), matmul(input, proj.wk), matmul(input, proj.wv));
    CHECK(bit_equal(iso.output, vanilla.output));
    CHECK(bit_equal(iso.weights, vanilla.weights));
}

TEST_CASE("full-coverage mask with identity reweight equals unmasked concat attention") {
    Rng rng(405);
    const int d = 8;
    const int image = 6;
    const Matrix input = oracle::random_matrix(rng, image, d);
    const Matrix refs = oracle::random_matrix(rng, 3, d);
    const AttnProjections proj = random_proj(rng, d);
    const auto layout = make_layout(image, {{0, 3}});
    const CharacterMask mask = make_mask(0, {1, 1, 1, 1, 1, 1});
    ReweightVector rw;
    rw.character_id = 0;
    rw.values.assign(image, 1.0f);
    const Matrix* ref_ptrs[] = {&refs};
    const CharacterMask* mask_ptrs[] = {&mask};
    const ReweightVector* rw_ptrs[] = {&rw};
    const IsoSelfAttention iso =
        isolated_self_attention(input, proj, ref_ptrs, layout, mask_ptrs, rw_ptrs);

    Matrix concat(image + 3, d);
    for (int r = 0; r < image; ++r) {
        std::copy(input.row(r).begin(), input.row(r).end(), concat.row(r).begin());
    }
    for (int r = 0; r < 3; ++r) {
        std::copy(refs.row(r).begin(), refs.row(r).end(), concat.row(image + r).begin());
    }
    const AttentionTensors plain = scaled_dot_attention(
        matmul(input, proj.wq), matmul(concat, proj.wk), matmul(concat, proj.wv));
    CHECK(bit_equal(iso.output, plain.output));
}

TEST_CASE("isolated self-attention matches the composed 64-bit oracle") {
    Rng rng(406);
    const int d = 8;
    const int image = 16;
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix input = oracle::random_matrix(rng, image, d);
        const Matrix refs_a = oracle::random_matrix(rng, 4, d);
        const Matrix refs_b = oracle::random_matrix(rng, 6, d);
        const AttnProjections proj = random_proj(rng, d);
        const auto layout = make_layout(image, {{0, 4}, {1, 6}});
        std::vector<uint8_t> bits_a(image), bits_b(image);
        for (int i = 0; i < image; ++i) {
            const int owner = static_cast<int>(rng.next_u64() % 3);
            bits_a[i] = owner == 0;
            bits_b[i] = owner == 1;
        }
        const CharacterMask mask_a = make_mask(0, bits_a);
        const CharacterMask mask_b = make_mask(1, bits_b);
        const auto map_a = oracle::random_map(rng, image);
        const auto map_b = oracle::random_map(rng, image);
        const ReweightVector rw_a = normalize_cross_map(0, map_a);
        const ReweightVector rw_b = normalize_cross_map(1, map_b);

        const Matrix* ref_ptrs[] = {&refs_a, &refs_b};
        const CharacterMask* mask_ptrs[] = {&mask_a, &mask_b};
        const ReweightVector* rw_ptrs[] = {&rw_a, &rw_b};
        const IsoSelfAttention got =
            isolated_self_attention(input, proj, ref_ptrs, layout, mask_ptrs, rw_ptrs);

        const auto drw_a = oracle::dnormalize_map(map_a);
        const auto drw_b = oracle::dnormalize_map(map_b);
        const std::vector<double>* drw_ptrs[] = {&drw_a, &drw_b};
        const oracle::DIsoSelf want = oracle::disolated_self_attention(
            oracle::from(input), oracle::from(proj.wq), oracle::from(proj.wk),
            oracle::from(proj.wv), ref_ptrs, layout, mask_ptrs, drw_ptrs);

        CHECK(oracle::max_abs_diff(got.weights.data, want.weights.data) < 1e-5);
        CHECK(oracle::max_abs_diff(got.output.data, want.output.data) < 1e-5);

        // forbidden reference mass is exactly zero, before and after reweight
        for (size_t e = 0; e < layout.entries.size(); ++e) {
            const auto& entry = layout.entries[e];
            const CharacterMask& mask = *mask_ptrs[e];
            for (int r = 0; r < image; ++r) {
                if (mask.bits[r]) {
                    continue;
                }
                for (int c = entry.offset; c < entry.offset + entry.count; ++c) {
                    CHECK(got.weights_pre_reweight.at(r, c) == 0.0f);
                    CHECK(got.weights.at(r, c) == 0.0f);
                }
            }
        }
    }
}
