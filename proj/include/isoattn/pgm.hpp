// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace isoattn {

/// Binary (P5) PGM, maxval 255. Map values are scaled so the map maximum
/// lands on 255; an all-zero map writes all-zero bytes.
void write_pgm(const std::filesystem::path& path, int h, int w, std::span<const float> values);

/// 0/1 bits rendered as 0/255.
void write_pgm_bits(const std::filesystem::path& path, int h, int w,
                    std::span<const uint8_t> bits);

struct PgmImage {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> bytes;
};

PgmImage read_pgm(const std::filesystem::path& path);

}  // namespace isoattn
