// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

#include "nm/vec.hpp"

namespace nm {

// Range compression applied before the image loss and metrics.
inline double tone_map(double v) {
    if (!(v >= 0.0)) throw std::domain_error("tone_map: negative or NaN input");
    return v / (1.0 + v);
}

inline Rgb tone_map(const Rgb& v) { return {tone_map(v.x), tone_map(v.y), tone_map(v.z)}; }

inline double tone_map_derivative(double v) {
    const double d = 1.0 + v;
    return 1.0 / (d * d);
}

}  // namespace nm
