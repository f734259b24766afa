// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/rng.hpp"

#include <cmath>

namespace isoattn {

uint64_t Rng::next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

float Rng::next_float() {
    return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float Rng::next_normal() {
    if (have_spare_) {
        have_spare_ = false;
        return static_cast<float>(spare_);
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
        u = 2.0 * next_double() - 1.0;
        v = 2.0 * next_double() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double mag = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * mag;
    have_spare_ = true;
    return static_cast<float>(u * mag);
}

uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t hash_combine(uint64_t a, uint64_t b) {
    return mix64(a + 0x9e3779b97f4a7c15ull * (b + 1));
}

uint64_t derive_seed(uint64_t base, uint64_t k1, uint64_t k2) {
    return hash_combine(hash_combine(base, k1), k2);
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace isoattn
