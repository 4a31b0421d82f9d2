// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nm/rng.hpp"
#include "nm/vec.hpp"

namespace nm {

// Area-preserving square-to-sphere map: z = 1 - 2u1, phi = 2 pi u2.
inline Vec3 square_to_sphere(double u1, double u2) {
    const double z = 1.0 - 2.0 * u1;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = kTwoPi * u2;
    return {r * std::cos(phi), r * std::sin(phi), z};
}

enum class SphereSampling { uniform, stratified };

// Row/column split for stratified sphere sampling: the largest factor of n
// not exceeding sqrt(n) becomes the z-strata count. Perfect squares give the
// usual sqrt(n) x sqrt(n) grid.
inline std::pair<int, int> stratified_grid_shape(int n) {
    int rows = int(std::sqrt(double(n)));
    while (rows > 1 && n % rows != 0) --rows;
    return {rows, n / rows};
}

// Directions on the unit sphere, each with constant pdf 1/(4 pi). Stratified
// mode jitters one sample per cell of an equal-area (z, phi) grid.
inline std::vector<Vec3> sample_sphere(SphereSampling mode, int n, Rng& rng) {
    if (n < 1) throw std::domain_error("sample_sphere: need n >= 1");
    std::vector<Vec3> dirs;
    dirs.reserve(n);
    if (mode == SphereSampling::uniform) {
        for (int i = 0; i < n; ++i) {
            const double u1 = rng.next();
            const double u2 = rng.next();
            dirs.push_back(square_to_sphere(u1, u2));
        }
    } else {
        const auto [rows, cols] = stratified_grid_shape(n);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) {
                const double u1 = (i + rng.next()) / rows;
                const double u2 = (j + rng.next()) / cols;
                dirs.push_back(square_to_sphere(u1, u2));
            }
        }
    }
    return dirs;
}

inline constexpr double sphere_sample_pdf() { return kInvFourPi; }

}  // namespace nm
