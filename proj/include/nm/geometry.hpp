// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <limits>
#include <optional>

#include "nm/vec.hpp"

namespace nm {

struct Ray {
    Vec3 o;
    Vec3 d;  // unit length
    Vec3 at(double t) const { return o + d * t; }
};

struct Interval {
    double t0 = 0.0, t1 = 0.0;
    double length() const { return t1 - t0; }
};

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::max()};
    Vec3 hi{std::numeric_limits<double>::lowest()};

    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    Vec3 extent() const { return hi - lo; }

    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
               p.z >= lo.z && p.z <= hi.z;
    }

    void expand(const Vec3& p) { lo = min(lo, p); hi = max(hi, p); }
    void expand(const Aabb& b) { lo = min(lo, b.lo); hi = max(hi, b.hi); }

    // Slab test. Returned interval is clamped to t >= 0.
    std::optional<Interval> intersect(const Ray& ray) const {
        double t0 = 0.0;
        double t1 = std::numeric_limits<double>::max();
        for (int axis = 0; axis < 3; ++axis) {
            const double inv = 1.0 / ray.d[axis];
            double near = (lo[axis] - ray.o[axis]) * inv;
            double far = (hi[axis] - ray.o[axis]) * inv;
            if (inv < 0.0) std::swap(near, far);
            t0 = std::max(t0, near);
            t1 = std::min(t1, far);
            if (t0 > t1) return std::nullopt;
        }
        return Interval{t0, t1};
    }
};

struct Mat3 {
    // Row-major rows.
    std::array<Vec3, 3> r{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};

    Vec3 operator*(const Vec3& v) const { return {dot(r[0], v), dot(r[1], v), dot(r[2], v)}; }
    Mat3 operator*(const Mat3& b) const {
        const Mat3 bt = b.transposed();
        Mat3 out;
        for (int i = 0; i < 3; ++i)
            out.r[i] = {dot(r[i], bt.r[0]), dot(r[i], bt.r[1]), dot(r[i], bt.r[2])};
        return out;
    }
    Mat3 transposed() const {
        Mat3 out;
        out.r[0] = {r[0].x, r[1].x, r[2].x};
        out.r[1] = {r[0].y, r[1].y, r[2].y};
        out.r[2] = {r[0].z, r[1].z, r[2].z};
        return out;
    }

    static Mat3 identity() { return {}; }

    // Rodrigues rotation about a unit axis.
    static Mat3 axis_angle(const Vec3& axis, double radians) {
        const Vec3 u = normalize(axis);
        const double c = std::cos(radians), s = std::sin(radians), ic = 1.0 - c;
        Mat3 m;
        m.r[0] = {c + u.x * u.x * ic, u.x * u.y * ic - u.z * s, u.x * u.z * ic + u.y * s};
        m.r[1] = {u.y * u.x * ic + u.z * s, c + u.y * u.y * ic, u.y * u.z * ic - u.x * s};
        m.r[2] = {u.z * u.x * ic - u.y * s, u.z * u.y * ic + u.x * s, c + u.z * u.z * ic};
        return m;
    }
};

// Rigid placement plus uniform scale: world = rotation * (scale * local) + translation.
struct Transform {
    Mat3 rotation;
    double scale = 1.0;
    Vec3 translation;

    Vec3 to_world(const Vec3& p) const { return rotation * (p * scale) + translation; }
    Vec3 to_local(const Vec3& p) const { return (rotation.transposed() * (p - translation)) / scale; }
    Vec3 dir_to_local(const Vec3& d) const { return rotation.transposed() * d; }
    Vec3 dir_to_world(const Vec3& d) const { return rotation * d; }

    // Local ray keeps a unit direction; world distances are local ones times `scale`.
    Ray ray_to_local(const Ray& ray) const { return {to_local(ray.o), dir_to_local(ray.d)}; }

    Transform inverse() const {
        Transform inv;
        inv.rotation = rotation.transposed();
        inv.scale = 1.0 / scale;
        inv.translation = (inv.rotation * translation) * (-inv.scale);
        return inv;
    }

    // this after other: world = this(other(local)).
    Transform compose(const Transform& other) const {
        Transform out;
        out.rotation = rotation * other.rotation;
        out.scale = scale * other.scale;
        out.translation = to_world(other.translation);
        return out;
    }

    static Transform identity() { return {}; }
    static Transform translate(const Vec3& t) { return {Mat3::identity(), 1.0, t}; }
};

}  // namespace nm
