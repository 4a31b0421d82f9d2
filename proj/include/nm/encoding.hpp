// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "nm/vec.hpp"

namespace nm {

// Frequency encoding: each scalar x maps to (sin(2^b pi x), cos(2^b pi x)) for
// b = 0..max_band, concatenated per input dimension. A "maximum frequency of
// 2^k" therefore means max_band = k and k+1 bands including band 0.
inline constexpr int encoded_size(int dims, int max_band) { return dims * 2 * (max_band + 1); }

inline void positional_encode(std::span<const double> x, int max_band, std::span<double> out) {
    if (max_band < 0) throw std::domain_error("positional_encode: max_band must be >= 0");
    size_t k = 0;
    for (double v : x) {
        double freq = kPi;  // 2^0 * pi
        for (int b = 0; b <= max_band; ++b) {
            out[k++] = std::sin(freq * v);
            out[k++] = std::cos(freq * v);
            freq *= 2.0;
        }
    }
}

inline std::vector<double> positional_encode(std::span<const double> x, int max_band) {
    std::vector<double> out(encoded_size(int(x.size()), max_band));
    positional_encode(x, max_band, out);
    return out;
}

inline void positional_encode(const Vec3& p, int max_band, std::span<double> out) {
    const double v[3] = {p.x, p.y, p.z};
    positional_encode(std::span<const double>(v, 3), max_band, out);
}

}  // namespace nm
