// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nm/grid_io.hpp"
#include "nm/media.hpp"
#include "nm/rng.hpp"
#include "nm/scene_io.hpp"

using namespace nm;
using Catch::Approx;

namespace {

SceneDescription sphere_scene(double sigma = 2.0, Rgb albedo = Rgb{0.8, 0.8, 0.8},
                              double g = 0.0) {
    SceneDescription scene;
    scene.instances.push_back(
        {std::make_shared<SphereField>(1.0, MediumSample{sigma, albedo, g}),
         Transform::identity()});
    scene.lights["key"] = LightCondition{{4.0, 0.0, 0.0}, 600.0, false};
    return scene;
}

SceneDescription box_scene(const Aabb& box, double sigma, Rgb albedo = Rgb{0.5, 0.5, 0.5}) {
    SceneDescription scene;
    scene.instances.push_back(
        {std::make_shared<HomogeneousField>(box, MediumSample{sigma, albedo, 0.0}),
         Transform::identity()});
    return scene;
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "nm_media_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("medium_at union semantics", "[media]") {
    auto scene = sphere_scene(2.0);
    CHECK(medium_at(scene, {0, 0, 0}).sigma == Approx(2.0));
    CHECK(medium_at(scene, {3, 0, 0}).sigma == 0.0);
    CHECK(medium_at(scene, {3, 0, 0}).albedo == Rgb{});

    // Two overlapping homogeneous boxes: sigma adds, albedo mixes by sigma.
    const Aabb box{Vec3{-1, -1, -1}, Vec3{1, 1, 1}};
    SceneDescription overlap;
    overlap.instances.push_back(
        {std::make_shared<HomogeneousField>(box, MediumSample{1.0, Rgb{1.0, 0.0, 0.0}, 0.2}),
         Transform::identity()});
    overlap.instances.push_back(
        {std::make_shared<HomogeneousField>(box, MediumSample{2.0, Rgb{0.0, 1.0, 0.0}, -0.4}),
         Transform::identity()});
    const MediumSample s = medium_at(overlap, {0, 0, 0});
    CHECK(s.sigma == Approx(3.0));
    CHECK(s.albedo.x == Approx(1.0 / 3.0));
    CHECK(s.albedo.y == Approx(2.0 / 3.0));
    CHECK(s.albedo.z == 0.0);
    CHECK(s.g == Approx((0.2 * 1.0 - 0.4 * 2.0) / 3.0));
}

TEST_CASE("instance transforms scale extinction as a density", "[media]") {
    SceneDescription scene;
    Transform t;
    t.scale = 2.0;
    scene.instances.push_back(
        {std::make_shared<SphereField>(1.0, MediumSample{2.0, Rgb{0.8, 0.8, 0.8}, 0.0}), t});
    // World radius 2; sigma halves so optical depth across the object is kept.
    CHECK(medium_at(scene, {0, 0, 0}).sigma == Approx(1.0));
    CHECK(medium_at(scene, {1.9, 0, 0}).sigma == Approx(1.0));
    CHECK(medium_at(scene, {2.1, 0, 0}).sigma == 0.0);
    const double along_diameter = -std::log(transmittance(scene, {-3, 0, 0}, {3, 0, 0}, 1));
    CHECK(along_diameter == Approx(2.0 * 2.0));  // sigma_local * local diameter
}

TEST_CASE("transmittance closed form and quadrature", "[media]") {
    auto vacuum = box_scene({Vec3{-1, -1, -1}, Vec3{1, 1, 1}}, 0.0);
    CHECK(transmittance(vacuum, {-2, 0, 0}, {2, 0, 0}, 16) == Approx(1.0));

    auto box = box_scene({Vec3{-5, -5, -5}, Vec3{5, 5, 5}}, 2.0);
    CHECK(transmittance(box, {0, 0, 0}, {1, 0, 0}, 1) == Approx(0.135335).epsilon(1e-5));
    CHECK(transmittance(box, {0, 0, 0}, {1, 0, 0}, 64, TransmittanceMethod::quadrature) ==
          Approx(0.135335).epsilon(1e-5));

    SceneDescription cloud;
    cloud.instances.push_back(
        {std::make_shared<NoiseCloudField>(NoiseCloudParams{}), Transform::identity()});
    Rng rng(31);
    for (int i = 0; i < 20; ++i) {
        const Vec3 a{rng.in(-1, 1), rng.in(-1, 1), rng.in(-1, 1)};
        const Vec3 b{rng.in(-1, 1), rng.in(-1, 1), rng.in(-1, 1)};
        const double coarse = transmittance(cloud, a, b, 1024);
        const double fine = transmittance(cloud, a, b, 16384);
        CHECK(std::abs(coarse - fine) / fine < 0.005);
    }
    CHECK_THROWS_AS(transmittance(box, {0, 0, 0}, {1, 0, 0}, 0), std::domain_error);
}

TEST_CASE("transmittance is multiplicative and monotone", "[media]") {
    auto box = box_scene({Vec3{-2, -2, -2}, Vec3{2, 2, 2}}, 1.3);
    const Vec3 p0{-1.5, 0.2, 0.1}, p2{1.7, -0.4, 0.3};
    const Vec3 p1 = lerp(p0, p2, 0.37);
    const double full = transmittance(box, p0, p2, 64);
    const double split = transmittance(box, p0, p1, 64) * transmittance(box, p1, p2, 64);
    CHECK(full == Approx(split).margin(1e-6));

    double prev = 1.0;
    for (int i = 1; i <= 10; ++i) {
        const double t = transmittance(box, p0, lerp(p0, p2, i / 10.0), 64);
        CHECK(t <= prev + 1e-12);
        prev = t;
    }
}

TEST_CASE("ray_bounds covers the instance union", "[media]") {
    auto box = box_scene({Vec3{-0.5, -0.5, -0.5}, Vec3{0.5, 0.5, 0.5}}, 1.0);
    auto hit = ray_bounds(box, {{0, 0, -5}, {0, 0, 1}});
    REQUIRE(hit.has_value());
    CHECK(hit->t0 == Approx(4.5));
    CHECK(hit->t1 == Approx(5.5));

    CHECK_FALSE(ray_bounds(box, {{0, 3, -5}, {0, 0, 1}}).has_value());

    auto inside = ray_bounds(box, {{0, 0, 0}, {0, 0, 1}});
    REQUIRE(inside.has_value());
    CHECK(inside->t0 == 0.0);
    CHECK(inside->t1 == Approx(0.5));

    // Disjoint boxes: the returned range spans both.
    SceneDescription two = box;
    two.instances.push_back({std::make_shared<HomogeneousField>(
                                 Aabb{Vec3{-0.5, -0.5, 2.5}, Vec3{0.5, 0.5, 3.5}},
                                 MediumSample{1.0, Rgb{0.5, 0.5, 0.5}, 0.0}),
                             Transform::identity()});
    auto both = ray_bounds(two, {{0, 0, -5}, {0, 0, 1}});
    REQUIRE(both.has_value());
    CHECK(both->t0 == Approx(4.5));
    CHECK(both->t1 == Approx(8.5));
}

TEST_CASE("grid interpolation is continuous and exact at centers", "[media]") {
    auto cloud = std::make_shared<NoiseCloudField>(NoiseCloudParams{});
    auto grid = extract_grid(*cloud, 16, 16, 16);
    // Exact at voxel centers.
    const Vec3 c = grid->voxel_center(5, 7, 9);
    CHECK(grid->at_local(c).sigma == Approx(double(grid->voxel(5, 7, 9)[0])).margin(1e-12));
    // Small steps inside a cell move the value by a small amount.
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const Vec3 p{rng.in(-0.8, 0.8), rng.in(-0.8, 0.8), rng.in(-0.8, 0.8)};
        const Vec3 q = p + Vec3{1e-5, -1e-5, 1e-5};
        CHECK(std::abs(grid->at_local(p).sigma - grid->at_local(q).sigma) < 1e-3);
        CHECK(grid->at_local(p).sigma == grid->at_local(p).sigma);  // deterministic
    }
}

TEST_CASE("extract_grid constants, identity round-trip and convergence", "[media]") {
    const Aabb box{Vec3{-1, -1, -1}, Vec3{1, 1, 1}};
    HomogeneousField homog(box, MediumSample{2.0, Rgb{0.8, 0.8, 0.8}, 0.1});
    auto grid16 = extract_grid(homog, 16, 16, 16);
    for (int i = 0; i < 16; i += 5)
        for (int j = 0; j < 16; j += 3) {
            CHECK(grid16->voxel(i, j, 8)[0] == 2.0f);
            CHECK(grid16->voxel(i, j, 8)[4] == 0.1f);
        }

    auto again = extract_grid(*grid16, 16, 16, 16);
    CHECK(again->data() == grid16->data());

    // Finer lattices approximate an analytic source monotonically better.
    NoiseCloudField cloud(NoiseCloudParams{});
    double prev_err = 1e30;
    for (int res : {8, 16, 32}) {
        auto g = extract_grid(cloud, res, res, res);
        double err = 0.0;
        Rng rng(77);
        for (int i = 0; i < 4000; ++i) {
            const Vec3 p{rng.in(-0.99, 0.99), rng.in(-0.99, 0.99), rng.in(-0.99, 0.99)};
            const double d = g->at_local(p).sigma - cloud.at_local(p).sigma;
            err += d * d;
        }
        CHECK(err < prev_err);
        prev_err = err;
    }

    CHECK_THROWS_AS(extract_grid(homog, 1024, 1024, 1024, size_t(1) << 20), resource_error);
    CHECK_THROWS_AS(extract_grid(homog, 1, 4, 4), std::domain_error);
}

TEST_CASE("apply_edit density and albedo scaling", "[media]") {
    const Aabb box{Vec3{-1, -1, -1}, Vec3{1, 1, 1}};
    HomogeneousField homog(box, MediumSample{2.0, Rgb{0.4, 0.4, 0.4}, 0.0});
    auto grid = extract_grid(homog, 8, 8, 8);

    auto same = apply_edit(*grid, GridEdit::density(1.0));
    CHECK(same->data() == grid->data());

    auto clear = apply_edit(*grid, GridEdit::density(0.0));
    SceneDescription cleared;
    cleared.instances.push_back({clear, Transform::identity()});
    CHECK(transmittance(cleared, {-2, 0, 0}, {2, 0, 0}, 128) == Approx(1.0));

    auto red = apply_edit(*grid, GridEdit::albedo(0, 2.0));
    CHECK(red->voxel(4, 4, 4)[1] == Approx(0.8f));
    CHECK(red->voxel(4, 4, 4)[2] == Approx(0.4f));
    CHECK(red->voxel(4, 4, 4)[3] == Approx(0.4f));
    // Original untouched; clamp holds for large factors.
    CHECK(grid->voxel(4, 4, 4)[1] == Approx(0.4f));
    auto sat = apply_edit(*grid, GridEdit::albedo(2, 100.0));
    CHECK(sat->voxel(4, 4, 4)[3] == 1.0f);
    CHECK_THROWS_AS(apply_edit(*grid, GridEdit::albedo(3, 1.0)), std::domain_error);
}

TEST_CASE("compose concatenates instances under placements", "[media]") {
    auto host = sphere_scene();
    auto same = compose({{host, Transform::identity()}});
    CHECK(same.instances.size() == 1);
    CHECK(medium_at(same, {0, 0, 0}).sigma == Approx(2.0));
    CHECK(same.lights.count("key") == 1);

    auto boxA = box_scene({Vec3{-0.5, -0.5, -0.5}, Vec3{0.5, 0.5, 0.5}}, 1.0);
    auto composed = compose({{boxA, Transform::identity()},
                             {boxA, Transform::translate({0, 0, 3})}});
    auto span = ray_bounds(composed, {{0, 0, -5}, {0, 0, 1}});
    REQUIRE(span.has_value());
    CHECK(span->t0 == Approx(4.5));
    CHECK(span->t1 == Approx(8.5));

    CHECK_THROWS_AS(compose({}), std::domain_error);
}

TEST_CASE("grid payload round-trips through NMGRID01", "[media]") {
    auto dir = temp_dir();
    NoiseCloudField cloud(NoiseCloudParams{});
    auto grid = extract_grid(cloud, 9, 10, 11);
    const auto path = (dir / "vol.nmgrid").string();
    write_grid(path, *grid);
    auto back = read_grid(path, grid->bounds());
    CHECK(back->nx() == 9);
    CHECK(back->ny() == 10);
    CHECK(back->nz() == 11);
    CHECK(back->data() == grid->data());

    // Corrupt magic.
    {
        std::ofstream f(dir / "bad.nmgrid", std::ios::binary);
        f << "NOTAGRID" << std::string(100, '\0');
    }
    CHECK_THROWS_AS(read_grid((dir / "bad.nmgrid").string(), grid->bounds()), io_error);

    // Truncated payload.
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
        bytes.resize(bytes.size() / 2);
        std::ofstream out(dir / "short.nmgrid", std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size()));
    }
    CHECK_THROWS_AS(read_grid((dir / "short.nmgrid").string(), grid->bounds()), io_error);
}

TEST_CASE("scene files round-trip", "[media]") {
    auto dir = temp_dir();
    SceneDescription scene = sphere_scene(3.0, Rgb{0.9, 0.7, 0.5}, 0.4);
    scene.background = {0.1, 0.2, 0.3};
    scene.lights["fill"] = LightCondition{{0.0, 5.0, 0.0}, 120.0, true};
    NoiseCloudParams ncp;
    ncp.seed = 42;
    Transform t = Transform::translate({2.5, 0, 0});
    t.scale = 0.5;
    t.rotation = Mat3::axis_angle({0, 1, 0}, 0.3);
    scene.instances.push_back({std::make_shared<NoiseCloudField>(ncp), t});
    auto grid = extract_grid(NoiseCloudField(ncp), 8, 8, 8);
    scene.instances.push_back({grid, Transform::translate({-2.5, 0, 0})});

    const auto path = (dir / "scene.json").string();
    save_scene(path, scene);
    SceneDescription loaded = load_scene(path);

    REQUIRE(loaded.instances.size() == 3);
    CHECK(loaded.background.y == Approx(0.2));
    CHECK(loaded.lights.at("fill").env);
    CHECK(loaded.lights.at("key").intensity == Approx(600.0));
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p{rng.in(-3.2, 3.2), rng.in(-1.2, 1.2), rng.in(-1.2, 1.2)};
        const MediumSample a = medium_at(scene, p), b = medium_at(loaded, p);
        CHECK(a.sigma == Approx(b.sigma).margin(1e-12));
        CHECK(a.albedo.x == Approx(b.albedo.x).margin(1e-12));
        CHECK(a.g == Approx(b.g).margin(1e-12));
    }

    CHECK_THROWS_AS(load_scene((dir / "missing.json").string()), io_error);
    {
        std::ofstream f(dir / "broken.json");
        f << "{ not json";
    }
    CHECK_THROWS_AS(load_scene((dir / "broken.json").string()), io_error);
}
