// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace isoattn {

/// Running arithmetic mean of one character's cross-attention map over the
/// denoising steps of a scene, at latent resolution.
struct AttnMapAccumulator {
    int character_id = -1;
    int h = 0;
    int w = 0;
    std::vector<float> running_mean;  // h*w, all >= 0
    int steps_seen = 0;

    AttnMapAccumulator(int character_id_, int h_, int w_);

    /// running_mean <- (running_mean * steps_seen + map) / (steps_seen + 1)
    void accumulate(std::span<const float> map);
};

/// Binary spatial mask for one character plus the noise score of the map it
/// came from. A degenerate mask (constant source map) has all bits zero.
struct CharacterMask {
    int character_id = -1;
    int h = 0;
    int w = 0;
    std::vector<uint8_t> bits;  // h*w, each 0 or 1
    float cv = 0.0f;            // coefficient of variation of the source map
    bool degenerate = false;
    int threshold_bin = -1;    // winning histogram boundary, -1 when degenerate
    double threshold = 0.0;    // boundary value in map units

    int popcount() const;
};

inline constexpr int kOtsuBins = 256;

/// Histogram bin index shared by the thresholder and its tests.
int otsu_bin_index(float value, float min_value, float max_value);

/// Bins the map into 256 levels over [min, max], picks the boundary that
/// maximizes between-class variance (first boundary wins ties), and sets
/// bits where value > threshold. A constant map yields a degenerate mask.
CharacterMask otsu_binarize(int character_id, int h, int w, std::span<const float> map);

/// Population standard deviation over mean. Throws when the mean is not
/// positive.
float coefficient_of_variation(std::span<const float> map);

/// Every cell claimed by two or more masks is kept only by the mask with the
/// lowest cv (ties broken by lower character id); outputs are pairwise
/// disjoint.
std::vector<CharacterMask> resolve_overlaps(std::vector<CharacterMask> masks);

}  // namespace isoattn
