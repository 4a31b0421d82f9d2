// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "nm/vec.hpp"

namespace nm {

// Henyey-Greenstein phase function. Convention: both directions point away
// from the scattering location, which puts +2g*cos(theta) in the denominator.
// g > 0 then peaks at cos(theta) = -1 (forward continuation of travel).
inline void check_asymmetry(double g) {
    if (!(std::abs(g) < 1.0)) throw std::domain_error("HG asymmetry must satisfy |g| < 1");
}

inline double hg_eval(double cos_theta, double g) {
    check_asymmetry(g);
    const double denom = 1.0 + g * g + 2.0 * g * cos_theta;
    return kInvFourPi * (1.0 - g * g) / (denom * std::sqrt(denom));
}

inline double hg_eval(const Vec3& w_o, const Vec3& w_i, double g) {
    return hg_eval(dot(w_o, w_i), g);
}

// Exact inverse-CDF sampling of cos(theta), uniform azimuth. Returns the
// sampled direction (pointing away from the scattering point) and its pdf,
// which equals hg_eval of the pair.
inline std::pair<Vec3, double> hg_sample(const Vec3& w_o, double g, double u1, double u2) {
    check_asymmetry(g);
    double cos_theta;
    if (std::abs(g) < 1e-6) {
        cos_theta = 1.0 - 2.0 * u1;
    } else {
        const double sq = (1.0 - g * g) / (1.0 + g - 2.0 * g * u1);
        cos_theta = (sq * sq - 1.0 - g * g) / (2.0 * g);
        cos_theta = std::clamp(cos_theta, -1.0, 1.0);
    }
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    const double phi = kTwoPi * u2;
    Vec3 t, b;
    branchless_onb(w_o, t, b);
    const Vec3 w_i = t * (sin_theta * std::cos(phi)) + b * (sin_theta * std::sin(phi)) + w_o * cos_theta;
    return {w_i, hg_eval(cos_theta, g)};
}

}  // namespace nm
