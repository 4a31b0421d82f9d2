// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nm/errors.hpp"
#include "nm/geometry.hpp"
#include "nm/light.hpp"
#include "nm/rng.hpp"
#include "nm/vec.hpp"

namespace nm {

// Physical properties at a point: extinction, scattering albedo, HG asymmetry.
struct MediumSample {
    double sigma = 0.0;
    Rgb albedo;
    double g = 0.0;
};

// One constant-sigma stretch of a ray, used for exact free-flight sampling.
struct SigmaSpan {
    double t0, t1;
    double sigma;
};

// A participating-media field in its local coordinate frame. Queries outside
// the local bounds return vacuum. Fields with piecewise-constant interiors
// also expose exact optical depth and sigma spans so the reference renderer
// can sample free flights in closed form.
class MediumField {
public:
    virtual ~MediumField() = default;
    virtual const Aabb& bounds() const = 0;
    virtual MediumSample at_local(const Vec3& p) const = 0;
    // Upper bound on sigma anywhere inside bounds (local units).
    virtual double majorant() const = 0;
    // Exact integral of sigma along the local segment a->b, when available.
    virtual std::optional<double> optical_depth_exact(const Vec3& a, const Vec3& b) const {
        return std::nullopt;
    }
    // Piecewise-constant sigma along a local ray, restricted to local [t0, t1].
    virtual bool sigma_spans(const Ray& ray, double t0, double t1,
                             std::vector<SigmaSpan>& out) const {
        (void)ray; (void)t0; (void)t1; (void)out;
        return false;
    }
};

class HomogeneousField final : public MediumField {
public:
    HomogeneousField(const Aabb& box, const MediumSample& s) : box_(box), sample_(s) {
        if (s.sigma < 0.0) throw std::domain_error("homogeneous field: sigma must be >= 0");
    }
    const Aabb& bounds() const override { return box_; }
    MediumSample at_local(const Vec3& p) const override {
        return box_.contains(p) ? sample_ : MediumSample{};
    }
    double majorant() const override { return sample_.sigma; }
    std::optional<double> optical_depth_exact(const Vec3& a, const Vec3& b) const override {
        const double len = length(b - a);
        if (len == 0.0) return 0.0;
        const Ray r{a, (b - a) / len};
        auto hit = box_.intersect(r);
        if (!hit) return 0.0;
        return sample_.sigma * std::max(0.0, std::min(hit->t1, len) - std::min(hit->t0, len));
    }
    bool sigma_spans(const Ray& ray, double t0, double t1,
                     std::vector<SigmaSpan>& out) const override {
        auto hit = box_.intersect(ray);
        if (hit) {
            const double a = std::max(hit->t0, t0), b = std::min(hit->t1, t1);
            if (a < b) out.push_back({a, b, sample_.sigma});
        }
        return true;
    }
    const MediumSample& sample() const { return sample_; }

private:
    Aabb box_;
    MediumSample sample_;
};

// Constant properties inside a sphere of the given radius, vacuum outside.
class SphereField final : public MediumField {
public:
    SphereField(double radius, const MediumSample& s) : radius_(radius), sample_(s) {
        box_ = {Vec3{-radius, -radius, -radius}, Vec3{radius, radius, radius}};
    }
    const Aabb& bounds() const override { return box_; }
    MediumSample at_local(const Vec3& p) const override {
        return length_sq(p) <= radius_ * radius_ ? sample_ : MediumSample{};
    }
    double majorant() const override { return sample_.sigma; }
    std::optional<double> optical_depth_exact(const Vec3& a, const Vec3& b) const override {
        const double len = length(b - a);
        if (len == 0.0) return 0.0;
        const Ray r{a, (b - a) / len};
        auto span = intersect_sphere(r);
        if (!span) return 0.0;
        return sample_.sigma *
               std::max(0.0, std::min(span->t1, len) - std::clamp(span->t0, 0.0, len));
    }
    bool sigma_spans(const Ray& ray, double t0, double t1,
                     std::vector<SigmaSpan>& out) const override {
        auto span = intersect_sphere(ray);
        if (span) {
            const double a = std::max(span->t0, t0), b = std::min(span->t1, t1);
            if (a < b) out.push_back({a, b, sample_.sigma});
        }
        return true;
    }
    double radius() const { return radius_; }
    const MediumSample& sample() const { return sample_; }

private:
    std::optional<Interval> intersect_sphere(const Ray& r) const {
        const double b = dot(r.o, r.d);
        const double c = length_sq(r.o) - radius_ * radius_;
        const double disc = b * b - c;
        if (disc <= 0.0) return std::nullopt;
        const double sq = std::sqrt(disc);
        const double t1 = -b + sq;
        if (t1 <= 0.0) return std::nullopt;
        return Interval{std::max(0.0, -b - sq), t1};
    }

    double radius_;
    MediumSample sample_;
    Aabb box_;
};

namespace detail {

// Lattice value noise with smoothstep interpolation, hashed per cell.
inline double lattice_value(int ix, int iy, int iz, uint64_t seed) {
    uint64_t h = Rng::mix(seed ^ (uint64_t(uint32_t(ix)) | (uint64_t(uint32_t(iy)) << 21) |
                                  (uint64_t(uint32_t(iz)) << 42)));
    return double(h >> 11) * 0x1.0p-53;
}

inline double value_noise(const Vec3& p, uint64_t seed) {
    const int ix = int(std::floor(p.x)), iy = int(std::floor(p.y)), iz = int(std::floor(p.z));
    auto fade = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double fx = fade(p.x - ix), fy = fade(p.y - iy), fz = fade(p.z - iz);
    double c[2][2][2];
    for (int dx = 0; dx < 2; ++dx)
        for (int dy = 0; dy < 2; ++dy)
            for (int dz = 0; dz < 2; ++dz)
                c[dx][dy][dz] = lattice_value(ix + dx, iy + dy, iz + dz, seed);
    auto l = [](double a, double b, double t) { return a + (b - a) * t; };
    const double x00 = l(c[0][0][0], c[1][0][0], fx), x10 = l(c[0][1][0], c[1][1][0], fx);
    const double x01 = l(c[0][0][1], c[1][0][1], fx), x11 = l(c[0][1][1], c[1][1][1], fx);
    return l(l(x00, x10, fy), l(x01, x11, fy), fz);
}

inline double fbm(const Vec3& p, int octaves, uint64_t seed) {
    double sum = 0.0, amp = 0.5, norm = 0.0;
    Vec3 q = p;
    for (int o = 0; o < octaves; ++o) {
        sum += amp * value_noise(q, seed + o);
        norm += amp;
        amp *= 0.5;
        q *= 2.0;
    }
    return sum / norm;
}

}  // namespace detail

// Heterogeneous cloud stand-in: fractal-noise density inside a sphere with a
// soft radial falloff. Self-contained replacement for external cloud assets.
struct NoiseCloudParams {
    double radius = 1.0;
    double sigma_scale = 4.0;
    Rgb albedo{0.9, 0.9, 0.9};
    double g = 0.0;
    double frequency = 2.5;
    int octaves = 4;
    double threshold = 0.35;
    uint64_t seed = 7;
};

class NoiseCloudField final : public MediumField {
public:
    explicit NoiseCloudField(const NoiseCloudParams& p) : p_(p) {
        box_ = {Vec3{-p.radius, -p.radius, -p.radius}, Vec3{p.radius, p.radius, p.radius}};
    }
    const Aabb& bounds() const override { return box_; }
    MediumSample at_local(const Vec3& p) const override {
        const double r = length(p);
        if (r > p_.radius) return {};
        const double falloff = std::clamp((p_.radius - r) / (0.25 * p_.radius), 0.0, 1.0);
        const double n = detail::fbm(p * p_.frequency, p_.octaves, p_.seed);
        const double density = std::max(0.0, (n - p_.threshold) / (1.0 - p_.threshold));
        return {p_.sigma_scale * density * falloff, p_.albedo, p_.g};
    }
    double majorant() const override { return p_.sigma_scale; }
    const NoiseCloudParams& params() const { return p_; }

private:
    NoiseCloudParams p_;
    Aabb box_;
};

// Dense voxel lattice of MediumSample with trilinear interpolation. Values
// live at voxel centers; queries clamp to the boundary centers.
class GridField final : public MediumField {
public:
    static constexpr int kChannels = 5;  // sigma, aR, aG, aB, g

    GridField(int nx, int ny, int nz, const Aabb& box, std::vector<float> data)
        : nx_(nx), ny_(ny), nz_(nz), box_(box), data_(std::move(data)) {
        if (nx < 2 || ny < 2 || nz < 2)
            throw std::domain_error("grid field: resolution must be >= 2 per axis");
        if (data_.size() != size_t(nx) * ny * nz * kChannels)
            throw std::domain_error("grid field: payload size mismatch");
        majorant_ = 0.0;
        for (size_t v = 0; v < data_.size(); v += kChannels)
            majorant_ = std::max(majorant_, double(data_[v]));
    }

    const Aabb& bounds() const override { return box_; }

    MediumSample at_local(const Vec3& p) const override {
        if (!box_.contains(p)) return {};
        const Vec3 ext = box_.extent();
        auto axis_coord = [](double v, double lo, double ext, int n) {
            return std::clamp((v - lo) / ext * n - 0.5, 0.0, double(n - 1));
        };
        const double gx = axis_coord(p.x, box_.lo.x, ext.x, nx_);
        const double gy = axis_coord(p.y, box_.lo.y, ext.y, ny_);
        const double gz = axis_coord(p.z, box_.lo.z, ext.z, nz_);
        const int x0 = std::min(int(gx), nx_ - 2), y0 = std::min(int(gy), ny_ - 2),
                  z0 = std::min(int(gz), nz_ - 2);
        const double fx = gx - x0, fy = gy - y0, fz = gz - z0;
        double acc[kChannels] = {};
        for (int dx = 0; dx < 2; ++dx) {
            const double wx = dx ? fx : 1.0 - fx;
            for (int dy = 0; dy < 2; ++dy) {
                const double wxy = wx * (dy ? fy : 1.0 - fy);
                for (int dz = 0; dz < 2; ++dz) {
                    const double w = wxy * (dz ? fz : 1.0 - fz);
                    const float* v = voxel(x0 + dx, y0 + dy, z0 + dz);
                    for (int ch = 0; ch < kChannels; ++ch) acc[ch] += w * v[ch];
                }
            }
        }
        return {acc[0], {acc[1], acc[2], acc[3]}, acc[4]};
    }

    double majorant() const override { return majorant_; }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }
    const float* voxel(int ix, int iy, int iz) const {
        return &data_[(size_t(ix) * ny_ + iy) * nz_ * kChannels + size_t(iz) * kChannels];
    }
    float* voxel(int ix, int iy, int iz) {
        return &data_[(size_t(ix) * ny_ + iy) * nz_ * kChannels + size_t(iz) * kChannels];
    }
    Vec3 voxel_center(int ix, int iy, int iz) const {
        const Vec3 ext = box_.extent();
        return {box_.lo.x + (ix + 0.5) / nx_ * ext.x, box_.lo.y + (iy + 0.5) / ny_ * ext.y,
                box_.lo.z + (iz + 0.5) / nz_ * ext.z};
    }

private:
    int nx_, ny_, nz_;
    Aabb box_;
    std::vector<float> data_;
    double majorant_ = 0.0;
};

// A field placed into the world. Extinction transforms as a density: scaling
// an object up by s divides world-space sigma by s, keeping optical depth
// along any world segment equal to the local one.
struct MediumInstance {
    std::shared_ptr<const MediumField> field;
    Transform transform;
};

struct SceneDescription {
    std::vector<MediumInstance> instances;
    Rgb background;
    std::map<std::string, LightCondition> lights;
    ShCoefficients env_sh = default_env_sky();

    const LightCondition& light(const std::string& name) const {
        auto it = lights.find(name);
        if (it == lights.end()) throw io_error("scene has no light named '" + name + "'");
        return it->second;
    }
};

// Union semantics over overlapping instances: extinction adds, albedo and g
// mix weighted by each instance's extinction.
inline MediumSample medium_at(const SceneDescription& scene, const Vec3& p) {
    double sigma = 0.0;
    Rgb albedo;
    double g = 0.0;
    for (const auto& inst : scene.instances) {
        const Vec3 local = inst.transform.to_local(p);
        if (!inst.field->bounds().contains(local)) continue;
        MediumSample s = inst.field->at_local(local);
        const double sw = s.sigma / inst.transform.scale;
        if (sw <= 0.0) continue;
        sigma += sw;
        albedo += s.albedo * sw;
        g += s.g * sw;
    }
    if (sigma <= 0.0) return {};
    return {sigma, albedo / sigma, g / sigma};
}

inline bool scene_has_exact_optical_depth(const SceneDescription& scene) {
    for (const auto& inst : scene.instances) {
        Vec3 zero{};
        if (!inst.field->optical_depth_exact(zero, zero).has_value()) return false;
    }
    return true;
}

inline double optical_depth_quadrature(const SceneDescription& scene, const Vec3& p0,
                                       const Vec3& p1, int steps) {
    const double len = length(p1 - p0);
    if (len == 0.0) return 0.0;
    const double ds = len / steps;
    double od = 0.0;
    for (int j = 0; j < steps; ++j) {
        const Vec3 mid = lerp(p0, p1, (j + 0.5) / steps);
        od += medium_at(scene, mid).sigma * ds;
    }
    return od;
}

enum class TransmittanceMethod { automatic, quadrature };

// exp(-integral of sigma) along the segment. Closed form when every instance
// supports exact optical depth (homogeneous interiors), midpoint quadrature
// otherwise. Optical depth is invariant under the instance transforms, so the
// exact path sums local-space depths directly.
inline double transmittance(const SceneDescription& scene, const Vec3& p0, const Vec3& p1,
                            int steps, TransmittanceMethod method = TransmittanceMethod::automatic) {
    if (steps < 1) throw std::domain_error("transmittance: steps must be >= 1");
    if (method == TransmittanceMethod::automatic && scene_has_exact_optical_depth(scene)) {
        double od = 0.0;
        for (const auto& inst : scene.instances)
            od += *inst.field->optical_depth_exact(inst.transform.to_local(p0),
                                                   inst.transform.to_local(p1));
        return std::exp(-od);
    }
    return std::exp(-optical_depth_quadrature(scene, p0, p1, steps));
}

// Tight world-space parametric range covering the union of instance boxes.
inline std::optional<Interval> ray_bounds(const SceneDescription& scene, const Ray& ray) {
    std::optional<Interval> merged;
    for (const auto& inst : scene.instances) {
        const Ray local = inst.transform.ray_to_local(ray);
        auto hit = inst.field->bounds().intersect(local);
        if (!hit) continue;
        const double s = inst.transform.scale;
        Interval world{hit->t0 * s, hit->t1 * s};
        if (!merged) {
            merged = world;
        } else {
            merged->t0 = std::min(merged->t0, world.t0);
            merged->t1 = std::max(merged->t1, world.t1);
        }
    }
    return merged;
}

// Samples a source at voxel centers over the given bounds. The cap guards
// against accidentally huge lattices.
inline std::shared_ptr<GridField> extract_grid(
    const std::function<MediumSample(const Vec3&)>& source, const Aabb& box, int nx, int ny,
    int nz, size_t memory_cap_bytes = size_t(1) << 30) {
    if (nx < 2 || ny < 2 || nz < 2)
        throw std::domain_error("extract_grid: resolution must be >= 2 per axis");
    const size_t bytes = size_t(nx) * ny * nz * GridField::kChannels * sizeof(float);
    if (bytes > memory_cap_bytes)
        throw resource_error("extract_grid: " + std::to_string(bytes) +
                             " bytes exceeds the memory cap");
    std::vector<float> data(size_t(nx) * ny * nz * GridField::kChannels);
    auto grid = std::make_shared<GridField>(nx, ny, nz, box, std::move(data));
    for (int ix = 0; ix < nx; ++ix)
        for (int iy = 0; iy < ny; ++iy)
            for (int iz = 0; iz < nz; ++iz) {
                const MediumSample s = source(grid->voxel_center(ix, iy, iz));
                float* v = grid->voxel(ix, iy, iz);
                v[0] = float(s.sigma);
                v[1] = float(s.albedo.x);
                v[2] = float(s.albedo.y);
                v[3] = float(s.albedo.z);
                v[4] = float(s.g);
            }
    return grid;
}

inline std::shared_ptr<GridField> extract_grid(const MediumField& field, int nx, int ny, int nz,
                                               size_t memory_cap_bytes = size_t(1) << 30) {
    return extract_grid([&](const Vec3& p) { return field.at_local(p); }, field.bounds(), nx, ny,
                        nz, memory_cap_bytes);
}

struct GridEdit {
    enum class Kind { density_scale, albedo_scale };
    Kind kind = Kind::density_scale;
    double factor = 1.0;
    int channel = 0;  // 0=R 1=G 2=B, albedo_scale only

    static GridEdit density(double k) { return {Kind::density_scale, k, 0}; }
    static GridEdit albedo(int channel, double k) { return {Kind::albedo_scale, k, channel}; }
};

// Pure transformation; the input grid is left untouched.
inline std::shared_ptr<GridField> apply_edit(const GridField& field, const GridEdit& edit) {
    if (edit.factor < 0.0) throw std::domain_error("apply_edit: scale factor must be >= 0");
    std::vector<float> data = field.data();
    if (edit.kind == GridEdit::Kind::density_scale) {
        for (size_t v = 0; v < data.size(); v += GridField::kChannels)
            data[v] = float(data[v] * edit.factor);
    } else {
        if (edit.channel < 0 || edit.channel > 2)
            throw std::domain_error("apply_edit: unknown albedo channel");
        for (size_t v = 0; v < data.size(); v += GridField::kChannels) {
            const double scaled = data[v + 1 + edit.channel] * edit.factor;
            data[v + 1 + edit.channel] = float(std::clamp(scaled, 0.0, 1.0));
        }
    }
    return std::make_shared<GridField>(field.nx(), field.ny(), field.nz(), field.bounds(),
                                       std::move(data));
}

// Concatenates instance lists under per-scene placements. Lights, background
// and environment come from the host (first) scene.
inline SceneDescription compose(
    const std::vector<std::pair<SceneDescription, Transform>>& scenes) {
    if (scenes.empty()) throw std::domain_error("compose: need at least one scene");
    SceneDescription out;
    out.background = scenes.front().first.background;
    out.lights = scenes.front().first.lights;
    out.env_sh = scenes.front().first.env_sh;
    for (const auto& [scene, placement] : scenes)
        for (const auto& inst : scene.instances)
            out.instances.push_back({inst.field, placement.compose(inst.transform)});
    return out;
}

}  // namespace nm
