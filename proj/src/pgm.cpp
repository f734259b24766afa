// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/pgm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace isoattn {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("pgm: cannot open " + path.string() + " for writing");
    }
    return f;
}

void write_header(std::ofstream& f, int h, int w) {
    f << "P5\n" << w << " " << h << "\n255\n";
}

}  // namespace

void write_pgm(const std::filesystem::path& path, int h, int w, std::span<const float> values) {
    const size_t n = static_cast<size_t>(h) * w;
    if (values.size() != n) {
        throw std::invalid_argument("write_pgm: value count does not match h*w");
    }
    float mx = 0.0f;
    for (float v : values) {
        if (v > mx) {
            mx = v;
        }
    }
    std::vector<uint8_t> bytes(n, 0);
    if (mx > 0.0f) {
        for (size_t i = 0; i < n; ++i) {
            const float scaled = values[i] / mx * 255.0f;
            bytes[i] = static_cast<uint8_t>(std::lround(scaled));
        }
    }
    auto f = open_out(path);
    write_header(f, h, w);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(n));
}

void write_pgm_bits(const std::filesystem::path& path, int h, int w,
                    std::span<const uint8_t> bits) {
    const size_t n = static_cast<size_t>(h) * w;
    if (bits.size() != n) {
        throw std::invalid_argument("write_pgm_bits: bit count does not match h*w");
    }
    std::vector<uint8_t> bytes(n);
    for (size_t i = 0; i < n; ++i) {
        bytes[i] = bits[i] ? 255 : 0;
    }
    auto f = open_out(path);
    write_header(f, h, w);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(n));
}

PgmImage read_pgm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("pgm: cannot open " + path.string());
    }
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) {
        throw std::runtime_error("pgm: unsupported header in " + path.string());
    }
    f.get();  // single whitespace byte after the header
    PgmImage img;
    img.h = h;
    img.w = w;
    img.bytes.resize(static_cast<size_t>(h) * w);
    f.read(reinterpret_cast<char*>(img.bytes.data()),
           static_cast<std::streamsize>(img.bytes.size()));
    if (!f) {
        throw std::runtime_error("pgm: truncated pixel data in " + path.string());
    }
    return img;
}

}  // namespace isoattn
