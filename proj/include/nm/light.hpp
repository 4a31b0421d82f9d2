// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nm/sh.hpp"
#include "nm/vec.hpp"

namespace nm {

// Known illumination for one image: a white point light (position zeta,
// radiant intensity I) plus a flag for the fixed environment light.
struct LightCondition {
    Vec3 position;
    double intensity = 0.0;
    bool env = false;
};

// Built-in analytic sky: a fixed two-band SH expansion, slightly blue and
// brighter toward +z. Stands in for an environment map asset.
inline ShCoefficients default_env_sky() {
    ShCoefficients sky = ShCoefficients::zeros(1);
    sky.c[sh_index(0, 0)] = {1.8, 2.0, 2.4};
    sky.c[sh_index(1, 0)] = {0.5, 0.5, 0.7};
    return sky;
}

inline Rgb env_radiance(const ShCoefficients& sky, const Vec3& w) {
    double basis[sh_count(kMaxShBand)];
    sh_basis(sky.l_max, w, {basis, size_t(sh_count(sky.l_max))});
    return sh_radiance(sky, {basis, size_t(sh_count(sky.l_max))});
}

}  // namespace nm
