// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>

#include "nm/geometry.hpp"
#include "nm/vec.hpp"

namespace nm {

// Pinhole camera. Local frame: x right, y up, looking down -z.
struct Camera {
    Transform c2w;  // rotation + translation, scale 1
    double vfov_deg = 45.0;
    int width = 0, height = 0;

    static Camera look_at(const Vec3& position, const Vec3& target, const Vec3& up,
                          double vfov_deg, int width, int height) {
        const Vec3 back = normalize(position - target);  // local +z
        Vec3 right = cross(normalize(up), back);
        const double rl = length(right);
        if (rl < 1e-9) throw std::domain_error("camera look_at: up parallel to view direction");
        right = right / rl;
        const Vec3 true_up = cross(back, right);
        Camera cam;
        cam.c2w.rotation.r[0] = {right.x, true_up.x, back.x};
        cam.c2w.rotation.r[1] = {right.y, true_up.y, back.y};
        cam.c2w.rotation.r[2] = {right.z, true_up.z, back.z};
        cam.c2w.translation = position;
        cam.vfov_deg = vfov_deg;
        cam.width = width;
        cam.height = height;
        return cam;
    }

    Vec3 position() const { return c2w.translation; }

    // px/py are continuous pixel coordinates; (0.5, 0.5) is the center of the
    // top-left pixel.
    Ray primary_ray(double px, double py) const {
        const double tan_half = std::tan(0.5 * vfov_deg * kPi / 180.0);
        const double aspect = double(width) / double(height);
        const double u = (2.0 * px / width - 1.0) * tan_half * aspect;
        const double v = (1.0 - 2.0 * py / height) * tan_half;
        const Vec3 dir_local = normalize(Vec3{u, v, -1.0});
        return {c2w.translation, c2w.dir_to_world(dir_local)};
    }

    Ray pixel_center_ray(int x, int y) const { return primary_ray(x + 0.5, y + 0.5); }
};

}  // namespace nm
