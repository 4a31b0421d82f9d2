// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nm/encoding.hpp"
#include "nm/phase.hpp"
#include "nm/rng.hpp"
#include "nm/sampling.hpp"
#include "nm/sh.hpp"
#include "nm/tonemap.hpp"

#include "../support/quadrature.hpp"

using namespace nm;
using Catch::Approx;

namespace {

// Marginal density of cos(theta) under the HG phase function: 2 pi * rho.
double hg_cos_density(double u, double g) {
    const double denom = 1.0 + g * g + 2.0 * g * u;
    return 0.5 * (1.0 - g * g) / (denom * std::sqrt(denom));
}

}  // namespace

TEST_CASE("hg_eval matches direct evaluation", "[mathkit]") {
    const Vec3 a = normalize(Vec3{0.3, -0.5, 0.8});
    const Vec3 b = normalize(Vec3{-0.2, 0.9, 0.1});
    CHECK(hg_eval(a, b, 0.0) == Approx(0.0795775).epsilon(1e-5));
    CHECK(hg_eval(-1.0, 0.5) == Approx(0.477465).epsilon(1e-5));
    CHECK(hg_eval(+1.0, 0.5) == Approx(0.0176839).epsilon(1e-5));
    CHECK_THROWS_AS(hg_eval(0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(hg_eval(0.0, -1.2), std::domain_error);
}

TEST_CASE("hg normalization over the sphere", "[mathkit]") {
    const Vec3 w_o = normalize(Vec3{0.2, 0.3, 0.93});
    for (double g : {-0.8, -0.3, 0.0, 0.5, 0.9}) {
        const double quad = nmtest::integrate_sphere(
            [&](const Vec3& w) { return hg_eval(w_o, w, g); }, 64, 64);
        CHECK(quad == Approx(1.0).margin(1e-6));

        Rng rng(17, uint64_t(g * 1000 + 1000));
        double sum = 0.0;
        const int n = 1'000'000;
        for (int i = 0; i < n; ++i)
            sum += hg_eval(w_o, square_to_sphere(rng.next(), rng.next()), g) / kInvFourPi;
        CHECK(sum / n == Approx(1.0).margin(1e-2));
    }
}

TEST_CASE("hg_sample pdf self-consistency and isotropic limit", "[mathkit]") {
    Rng rng(3);
    const Vec3 w_o = normalize(Vec3{-0.4, 0.1, 0.9});
    for (double g : {-0.7, 0.0, 0.3, 0.9}) {
        for (int i = 0; i < 200; ++i) {
            const auto [w_i, pdf] = hg_sample(w_o, g, rng.next(), rng.next());
            CHECK(length(w_i) == Approx(1.0).margin(1e-9));
            CHECK(pdf == Approx(hg_eval(w_o, w_i, g)).epsilon(1e-12));
            if (g == 0.0) CHECK(pdf == Approx(kInvFourPi).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(hg_sample(w_o, 1.0, 0.5, 0.5), std::domain_error);
}

TEST_CASE("hg_sample empirical mean of cos(theta) matches quadrature", "[mathkit]") {
    const double g = 0.9;
    const double quad_mean = nmtest::integrate_1d(
        [&](double u) { return u * hg_cos_density(u, g); }, -1.0, 1.0, 64, 16);
    Rng rng(99);
    const Vec3 w_o{0.0, 0.0, 1.0};
    double sum = 0.0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) {
        const auto [w_i, pdf] = hg_sample(w_o, g, rng.next(), rng.next());
        sum += dot(w_o, w_i);
    }
    CHECK(sum / n == Approx(quad_mean).margin(1e-2));
}

TEST_CASE("hg_sample histogram passes a chi-square test", "[mathkit]") {
    const double g = 0.5;
    const int bins = 64;
    const int n = 1'000'000;
    std::vector<double> expected(bins);
    for (int b = 0; b < bins; ++b) {
        const double lo = -1.0 + 2.0 * b / bins, hi = -1.0 + 2.0 * (b + 1) / bins;
        expected[b] =
            n * nmtest::integrate_1d([&](double u) { return hg_cos_density(u, g); }, lo, hi, 4, 8);
    }
    std::vector<int> observed(bins, 0);
    Rng rng(7);
    const Vec3 w_o{0.0, 0.0, 1.0};
    for (int i = 0; i < n; ++i) {
        const auto [w_i, pdf] = hg_sample(w_o, g, rng.next(), rng.next());
        const int b = std::min(bins - 1, int((dot(w_o, w_i) + 1.0) * 0.5 * bins));
        observed[b]++;
    }
    double chi2 = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double d = observed[b] - expected[b];
        chi2 += d * d / expected[b];
    }
    // 0.999 quantile of chi-square with 63 dof is 103.4.
    CHECK(chi2 < 103.4);
}

TEST_CASE("sh_basis fixed values", "[mathkit]") {
    const auto y0 = sh_basis(0, normalize(Vec3{0.4, -0.2, 0.6}));
    REQUIRE(y0.size() == 1);
    CHECK(y0[0] == Approx(0.2820948).epsilon(1e-6));

    const auto y1 = sh_basis(1, Vec3{0.0, 0.0, 1.0});
    REQUIRE(y1.size() == 4);
    CHECK(y1[sh_index(0, 0)] == Approx(0.282095).epsilon(1e-5));
    CHECK(y1[sh_index(1, -1)] == Approx(0.0).margin(1e-12));
    CHECK(y1[sh_index(1, 0)] == Approx(0.488603).epsilon(1e-5));
    CHECK(y1[sh_index(1, 1)] == Approx(0.0).margin(1e-12));

    CHECK_THROWS_AS(sh_basis(-1, Vec3{0, 0, 1}), std::domain_error);
    CHECK_THROWS_AS(sh_basis(10, Vec3{0, 0, 1}), std::domain_error);
}

TEST_CASE("sh basis is orthonormal up to l_max=5", "[mathkit]") {
    const int n = sh_count(5);
    std::vector<double> gram(size_t(n) * n, 0.0);
    // Accumulate the Gram matrix with the same product-rule quadrature used
    // for scalar integrands.
    const auto q = nmtest::gauss_legendre(32);
    const int n_phi = 64;
    std::vector<double> basis(n);
    for (int i = 0; i < 32; ++i) {
        const double ct = q.nodes[i];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int j = 0; j < n_phi; ++j) {
            const double phi = kTwoPi * (j + 0.5) / n_phi;
            sh_basis(5, {st * std::cos(phi), st * std::sin(phi), ct}, basis);
            const double w = q.weights[i] * kTwoPi / n_phi;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b <= a; ++b) gram[a * n + b] += w * basis[a] * basis[b];
        }
    }
    double worst = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b <= a; ++b)
            worst = std::max(worst, std::abs(gram[a * n + b] - (a == b ? 1.0 : 0.0)));
    CHECK(worst < 1e-6);
}

TEST_CASE("sh_radiance evaluates and clamps", "[mathkit]") {
    const Vec3 w = normalize(Vec3{0.1, 0.7, 0.7});
    auto zero = ShCoefficients::zeros(2);
    CHECK(sh_radiance(zero, w) == Rgb{});

    auto constant = ShCoefficients::zeros(1);
    constant.c[0] = {1.0, 1.0, 1.0};
    for (const Vec3& dir : {Vec3{1, 0, 0}, Vec3{0, 0, -1}, w}) {
        const Rgb r = sh_radiance(constant, dir);
        CHECK(r.x == Approx(0.282095).epsilon(1e-5));
        CHECK(r.y == r.x);
        CHECK(r.z == r.x);
    }

    auto negative = ShCoefficients::zeros(0);
    negative.c[0] = {-2.0, -2.0, -2.0};
    CHECK(sh_radiance(negative, w) == Rgb{});
}

TEST_CASE("sh least-squares projection reproduces band-limited signals", "[mathkit]") {
    ShCoefficients truth = ShCoefficients::zeros(2);
    Rng rng(5);
    for (auto& c : truth.c) c = {rng.in(-1, 1), rng.in(-1, 1), rng.in(-1, 1)};
    // Sample the *unclamped* expansion so the projection target is linear.
    std::vector<Vec3> dirs;
    std::vector<Rgb> values;
    Rng dir_rng(8);
    for (int i = 0; i < 500; ++i) {
        const Vec3 w = square_to_sphere(dir_rng.next(), dir_rng.next());
        const auto basis = sh_basis(2, w);
        Rgb v;
        for (size_t k = 0; k < truth.c.size(); ++k) v += truth.c[k] * basis[k];
        dirs.push_back(w);
        values.push_back(v);
    }
    const ShCoefficients fit = sh_project_samples(2, dirs, values);
    for (size_t k = 0; k < truth.c.size(); ++k)
        for (int ch = 0; ch < 3; ++ch)
            CHECK(fit.c[k][ch] == Approx(truth.c[k][ch]).margin(1e-6));
}

TEST_CASE("positional_encode conventions", "[mathkit]") {
    const double zero[1] = {0.0};
    const auto e0 = positional_encode(std::span<const double>(zero, 1), 3);
    REQUIRE(e0.size() == 8);
    for (size_t i = 0; i < e0.size(); i += 2) {
        CHECK(e0[i] == Approx(0.0).margin(1e-15));      // sines
        CHECK(e0[i + 1] == Approx(1.0).margin(1e-15));  // cosines
    }

    const double half[1] = {0.5};
    const auto e1 = positional_encode(std::span<const double>(half, 1), 0);
    REQUIRE(e1.size() == 2);
    CHECK(e1[0] == Approx(1.0).margin(1e-12));
    CHECK(e1[1] == Approx(0.0).margin(1e-12));

    CHECK(encoded_size(3, 8) == 54);
    const double p[3] = {0.123, -4.56, 78.9};
    const auto e2 = positional_encode(std::span<const double>(p, 3), 8);
    REQUIRE(e2.size() == 54);
    for (double v : e2) {
        CHECK(v <= 1.0);
        CHECK(v >= -1.0);
    }
}

TEST_CASE("sample_sphere mapping, norms and integration", "[mathkit]") {
    const Vec3 mapped = square_to_sphere(0.5, 0.5);
    CHECK(mapped.x == Approx(-1.0).margin(1e-12));
    CHECK(mapped.y == Approx(0.0).margin(1e-12));
    CHECK(mapped.z == Approx(0.0).margin(1e-12));

    Rng rng(11);
    CHECK_THROWS_AS(sample_sphere(SphereSampling::uniform, 0, rng), std::domain_error);

    const int n = 1'000'000;
    auto dirs = sample_sphere(SphereSampling::uniform, n, rng);
    double hemi = 0.0;
    Vec3 mean;
    for (const Vec3& d : dirs) {
        CHECK(std::abs(length_sq(d) - 1.0) < 2e-6);
        if (d.z > 0.0) hemi += 1.0;
        mean += d;
    }
    // Solid angle of the upper hemisphere via the constant-pdf estimator.
    CHECK(hemi / n * kFourPi == Approx(kTwoPi).epsilon(1e-3));
    mean = mean / double(n);
    CHECK(std::abs(mean.x) < 3e-3);
    CHECK(std::abs(mean.y) < 3e-3);
    CHECK(std::abs(mean.z) < 3e-3);
}

TEST_CASE("stratified sphere sampling covers the sphere evenly", "[mathkit]") {
    CHECK(stratified_grid_shape(64) == std::pair<int, int>{8, 8});
    CHECK(stratified_grid_shape(32) == std::pair<int, int>{4, 8});

    Rng rng(13);
    auto dirs = sample_sphere(SphereSampling::stratified, 64, rng);
    REQUIRE(dirs.size() == 64);
    Vec3 mean;
    for (const Vec3& d : dirs) {
        CHECK(std::abs(length_sq(d) - 1.0) < 2e-6);
        mean += d;
    }
    // One stratum per cell keeps the degree-1 moments tightly centered even
    // at small counts.
    mean = mean / 64.0;
    CHECK(std::abs(mean.x) < 0.05);
    CHECK(std::abs(mean.y) < 0.05);
    CHECK(std::abs(mean.z) < 0.05);
}

TEST_CASE("tone_map values and monotonicity", "[mathkit]") {
    CHECK(tone_map(0.0) == 0.0);
    CHECK(tone_map(1.0) == Approx(0.5));
    CHECK(tone_map(3.0) == Approx(0.75));
    CHECK_THROWS_AS(tone_map(-0.1), std::domain_error);

    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.in(0.0, 50.0), b = rng.in(0.0, 50.0);
        if (a < b) CHECK(tone_map(a) < tone_map(b));
        if (a > b) CHECK(tone_map(a) > tone_map(b));
    }
}
