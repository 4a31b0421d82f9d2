// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "nm/vec.hpp"

namespace nm {

// Highest band exercised anywhere (SH-9 in the band sweep).
inline constexpr int kMaxShBand = 9;

inline constexpr int sh_count(int l_max) { return (l_max + 1) * (l_max + 1); }
inline constexpr int sh_index(int l, int m) { return l * (l + 1) + m; }

namespace detail {

// Associated Legendre P_l^m(x), Condon-Shortley phase included, evaluated for
// all l in [m, l_max] at fixed m. sin_theta = sqrt(1-x^2) passed separately.
inline void legendre_column(int m, int l_max, double x, double sin_theta,
                            std::span<double> out) {
    double pmm = 1.0;
    for (int i = 1; i <= m; ++i) pmm *= -(2.0 * i - 1.0) * sin_theta;
    out[0] = pmm;
    if (l_max == m) return;
    double pmm1 = x * (2.0 * m + 1.0) * pmm;
    out[1] = pmm1;
    for (int l = m + 2; l <= l_max; ++l) {
        const double p = (x * (2.0 * l - 1.0) * pmm1 - (l + m - 1.0) * pmm) / (l - m);
        pmm = pmm1;
        pmm1 = p;
        out[l - m] = p;
    }
}

inline double sh_normalization(int l, int m) {
    double ratio = 1.0;  // (l-m)! / (l+m)!
    for (int k = l - m + 1; k <= l + m; ++k) ratio /= double(k);
    return std::sqrt((2.0 * l + 1.0) * kInvFourPi * ratio);
}

}  // namespace detail

// Real spherical harmonics basis {Y_l^m}, laid out at index l*(l+1)+m.
// m = 0 entries are K_l^0 P_l^0(cos theta); |m| > 0 entries carry the sqrt(2)
// factor and cos/sin(m phi) for positive/negative m.
inline void sh_basis(int l_max, const Vec3& w, std::span<double> out) {
    if (l_max < 0 || l_max > kMaxShBand)
        throw std::domain_error("sh_basis: l_max out of [0, 9]");
    const double ct = w.z;
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    const double phi = std::atan2(w.y, w.x);
    const double cos_phi = std::cos(phi), sin_phi = std::sin(phi);

    double plm[kMaxShBand + 1];
    // m = 0
    detail::legendre_column(0, l_max, ct, st, {plm, size_t(l_max + 1)});
    for (int l = 0; l <= l_max; ++l)
        out[sh_index(l, 0)] = detail::sh_normalization(l, 0) * plm[l];
    // |m| > 0; cos(m phi) / sin(m phi) by recurrence
    double cm_prev = 1.0, sm_prev = 0.0;          // m-1 terms
    double cm = cos_phi, sm = sin_phi;            // m terms
    constexpr double kSqrt2 = 1.4142135623730951;
    for (int m = 1; m <= l_max; ++m) {
        detail::legendre_column(m, l_max, ct, st, {plm, size_t(l_max - m + 1)});
        for (int l = m; l <= l_max; ++l) {
            const double k = kSqrt2 * detail::sh_normalization(l, m) * plm[l - m];
            out[sh_index(l, m)] = k * cm;
            out[sh_index(l, -m)] = k * sm;
        }
        const double cm_next = 2.0 * cos_phi * cm - cm_prev;
        const double sm_next = 2.0 * cos_phi * sm - sm_prev;
        cm_prev = cm; sm_prev = sm;
        cm = cm_next; sm = sm_next;
    }
}

inline std::vector<double> sh_basis(int l_max, const Vec3& w) {
    std::vector<double> out(sh_count(l_max));
    sh_basis(l_max, w, out);
    return out;
}

// Per-point RGB SH coefficient block for incident indirect radiance.
struct ShCoefficients {
    int l_max = 0;
    std::vector<Rgb> c;  // sh_count(l_max) entries, index l*(l+1)+m

    static ShCoefficients zeros(int l_max) {
        return {l_max, std::vector<Rgb>(sh_count(l_max))};
    }
    bool well_formed() const { return l_max >= 0 && int(c.size()) == sh_count(l_max); }
};

// max(0, sum c_l^m Y_l^m) per channel; the clamp keeps reconstructed incident
// radiance non-negative.
inline Rgb sh_radiance(const ShCoefficients& coeffs, std::span<const double> basis) {
    Rgb sum;
    for (size_t i = 0; i < coeffs.c.size(); ++i) sum += coeffs.c[i] * basis[i];
    return max(sum, Rgb{});
}

inline Rgb sh_radiance(const ShCoefficients& coeffs, const Vec3& w) {
    if (!coeffs.well_formed()) throw std::domain_error("sh_radiance: malformed coefficients");
    std::vector<double> basis(coeffs.c.size());
    sh_basis(coeffs.l_max, w, basis);
    return sh_radiance(coeffs, basis);
}

// Dense SPD solve via Cholesky, used for least-squares SH projection.
// A is n*n row-major and gets overwritten by its factor.
inline void solve_spd_inplace(std::vector<double>& a, std::vector<double>& b, int n) {
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (s <= 0.0) throw std::runtime_error("solve_spd: matrix not positive definite");
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
}

// Least-squares fit of SH coefficients to directional radiance samples.
// A small ridge term keeps the normal equations well conditioned when the
// sample count is close to the basis size.
inline ShCoefficients sh_project_samples(int l_max, std::span<const Vec3> dirs,
                                         std::span<const Rgb> values, double ridge = 1e-9) {
    if (dirs.size() != values.size() || dirs.empty())
        throw std::domain_error("sh_project_samples: need matching non-empty samples");
    const int n = sh_count(l_max);
    std::vector<double> gram(size_t(n) * n, 0.0);
    std::vector<double> rhs[3];
    for (auto& r : rhs) r.assign(n, 0.0);
    std::vector<double> basis(n);
    for (size_t s = 0; s < dirs.size(); ++s) {
        sh_basis(l_max, dirs[s], basis);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) gram[i * n + j] += basis[i] * basis[j];
            rhs[0][i] += basis[i] * values[s].x;
            rhs[1][i] += basis[i] * values[s].y;
            rhs[2][i] += basis[i] * values[s].z;
        }
    }
    for (int i = 0; i < n; ++i) {
        gram[i * n + i] += ridge * dirs.size();
        for (int j = i + 1; j < n; ++j) gram[i * n + j] = gram[j * n + i];
    }
    ShCoefficients out = ShCoefficients::zeros(l_max);
    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> a = gram;
        solve_spd_inplace(a, rhs[ch], n);
        for (int i = 0; i < n; ++i) out.c[i][ch] = rhs[ch][i];
    }
    return out;
}

}  // namespace nm
