// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace isoattn {

/// Keyed splitmix64 generator. Every random quantity in the engine (weights,
/// latents, prompt embeddings) is drawn from a stream derived from an explicit
/// seed tuple, so runs are reproducible and streams never alias by accident.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();

    /// Uniform in [0, 1), 24 bits of mantissa.
    float next_float();

    /// Uniform in [0, 1), 53 bits of mantissa.
    double next_double();

    /// Standard normal via the polar (Marsaglia) method. Avoids trig so the
    /// only libm calls are sqrt/log.
    float next_normal();

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

uint64_t mix64(uint64_t z);
uint64_t hash_combine(uint64_t a, uint64_t b);
uint64_t derive_seed(uint64_t base, uint64_t k1, uint64_t k2 = 0);
uint64_t fnv1a64(std::string_view s);

}  // namespace isoattn
