// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/mask.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace isoattn {

namespace {

void check_map(std::span<const float> map, size_t expected, const char* op) {
    if (map.size() != expected) {
        throw std::invalid_argument(std::string(op) + ": map length " +
                                    std::to_string(map.size()) + " != h*w " +
                                    std::to_string(expected));
    }
    for (float v : map) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(op) + ": non-finite map entry");
        }
        if (v < 0.0f) {
            throw std::invalid_argument(std::string(op) + ": negative map entry");
        }
    }
}

}  // namespace

AttnMapAccumulator::AttnMapAccumulator(int character_id_, int h_, int w_)
    : character_id(character_id_), h(h_), w(w_) {
    if (h_ <= 0 || w_ <= 0) {
        throw std::invalid_argument("AttnMapAccumulator: resolution must be positive");
    }
    running_mean.assign(static_cast<size_t>(h_) * w_, 0.0f);
}

void AttnMapAccumulator::accumulate(std::span<const float> map) {
    check_map(map, running_mean.size(), "accumulate");
    const float n = static_cast<float>(steps_seen);
    for (size_t i = 0; i < running_mean.size(); ++i) {
        running_mean[i] = (running_mean[i] * n + map[i]) / (n + 1.0f);
    }
    ++steps_seen;
}

int CharacterMask::popcount() const {
    int n = 0;
    for (uint8_t b : bits) {
        n += b;
    }
    return n;
}

int otsu_bin_index(float value, float min_value, float max_value) {
    const double t = (static_cast<double>(value) - min_value) /
                     (static_cast<double>(max_value) - min_value) * kOtsuBins;
    const int bin = static_cast<int>(t);
    return bin > kOtsuBins - 1 ? kOtsuBins - 1 : bin;
}

CharacterMask otsu_binarize(int character_id, int h, int w, std::span<const float> map) {
    const size_t n = static_cast<size_t>(h) * w;
    check_map(map, n, "otsu_binarize");

    CharacterMask mask;
    mask.character_id = character_id;
    mask.h = h;
    mask.w = w;
    mask.bits.assign(n, 0);

    double sum = 0.0;
    float mn = map[0], mx = map[0];
    for (float v : map) {
        sum += v;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double mean = sum / static_cast<double>(n);
    if (mean > 0.0) {
        double var = 0.0;
        for (float v : map) {
            const double d = v - mean;
            var += d * d;
        }
        mask.cv = static_cast<float>(std::sqrt(var / static_cast<double>(n)) / mean);
    }

    if (mx == mn) {
        mask.degenerate = true;
        return mask;
    }

    double hist[kOtsuBins] = {};
    for (float v : map) {
        hist[otsu_bin_index(v, mn, mx)] += 1.0;
    }
    double total_weight = static_cast<double>(n);
    double total_sum = 0.0;
    for (int b = 0; b < kOtsuBins; ++b) {
        total_sum += hist[b] * b;
    }

    // Single cumulative pass; candidate t splits bins [0..t] | [t+1..255].
    double best = -1.0;
    int best_t = 0;
    double w0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < kOtsuBins; ++t) {
        w0 += hist[t];
        sum0 += hist[t] * t;
        const double w1 = total_weight - w0;
        if (w0 == 0.0 || w1 == 0.0) {
            continue;
        }
        const double m0 = sum0 / w0;
        const double m1 = (total_sum - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_t = t;
        }
    }

    mask.threshold_bin = best_t;
    mask.threshold = static_cast<double>(mn) +
                     (static_cast<double>(mx) - mn) * (best_t + 1) / kOtsuBins;
    for (size_t i = 0; i < n; ++i) {
        mask.bits[i] = static_cast<double>(map[i]) > mask.threshold ? 1 : 0;
    }
    return mask;
}

float coefficient_of_variation(std::span<const float> map) {
    if (map.empty()) {
        throw std::invalid_argument("coefficient_of_variation: empty map");
    }
    double sum = 0.0;
    for (float v : map) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("coefficient_of_variation: non-finite entry");
        }
        sum += v;
    }
    const double mean = sum / static_cast<double>(map.size());
    if (mean <= 0.0) {
        throw std::domain_error("coefficient_of_variation: mean must be positive");
    }
    double var = 0.0;
    for (float v : map) {
        const double d = v - mean;
        var += d * d;
    }
    return static_cast<float>(std::sqrt(var / static_cast<double>(map.size())) / mean);
}

std::vector<CharacterMask> resolve_overlaps(std::vector<CharacterMask> masks) {
    if (masks.size() < 2) {
        return masks;
    }
    const size_t n = masks.front().bits.size();
    for (const auto& m : masks) {
        if (m.h != masks.front().h || m.w != masks.front().w) {
            throw std::invalid_argument("resolve_overlaps: masks disagree on resolution");
        }
    }
    for (size_t cell = 0; cell < n; ++cell) {
        int winner = -1;
        for (size_t i = 0; i < masks.size(); ++i) {
            if (!masks[i].bits[cell]) {
                continue;
            }
            if (winner < 0 || masks[i].cv < masks[winner].cv ||
                (masks[i].cv == masks[winner].cv &&
                 masks[i].character_id < masks[winner].character_id)) {
                winner = static_cast<int>(i);
            }
        }
        if (winner < 0) {
            continue;
        }
        for (size_t i = 0; i < masks.size(); ++i) {
            if (static_cast<int>(i) != winner) {
                masks[i].bits[cell] = 0;
            }
        }
    }
    return masks;
}

}  // namespace isoattn
