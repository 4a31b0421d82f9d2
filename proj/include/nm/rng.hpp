// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace nm {

// Counter-based random stream (splitmix64 core). Streams are keyed by up to
// three stream indices on top of the seed, so any (pixel, sample, purpose)
// combination gets an independent, reproducible sequence no matter which
// thread consumes it.
class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t s0 = 0, uint64_t s1 = 0, uint64_t s2 = 0) {
        state_ = mix(seed + 0x9E3779B97F4A7C15ull);
        state_ = mix(state_ ^ mix(s0 + 0xBF58476D1CE4E5B9ull));
        state_ = mix(state_ ^ mix(s1 + 0x94D049BB133111EBull));
        state_ = mix(state_ ^ mix(s2 + 0xD6E8FEB86659FD93ull));
    }

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    // Uniform in [0, 1).
    double next() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double in(double a, double b) { return a + (b - a) * next(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    uint64_t state_;
};

}  // namespace nm
