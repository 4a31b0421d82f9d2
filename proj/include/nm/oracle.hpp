// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "nm/camera.hpp"
#include "nm/errors.hpp"
#include "nm/image.hpp"
#include "nm/media.hpp"
#include "nm/parallel.hpp"
#include "nm/phase.hpp"
#include "nm/rng.hpp"
#include "nm/sampling.hpp"
#include "nm/sh.hpp"

namespace nm {

struct PathTracerConfig {
    int spp = 64;
    int max_bounces = 64;
    int rr_start = 8;        // bounce index where Russian roulette begins
    double rr_floor = 0.05;  // minimum continuation probability
    int transmittance_steps = 256;
    uint64_t seed = 0;
    bool pixel_jitter = false;  // default: primary rays through pixel centers

    void validate() const {
        if (spp < 1 || max_bounces < 1 || !(rr_floor > 0.0 && rr_floor <= 1.0) ||
            transmittance_steps < 1)
            throw std::domain_error("PathTracerConfig: invalid configuration");
    }
};

namespace detail {

// Piecewise-constant sigma profile along a world ray, when every instance has
// one. World t = local t * scale; world sigma = local sigma / scale, so the
// optical depth per span is preserved.
inline bool build_sigma_profile(const SceneDescription& scene, const Ray& ray, double t0,
                                double t1, std::vector<SigmaSpan>& spans,
                                std::vector<double>& events) {
    spans.clear();
    std::vector<SigmaSpan> local;
    for (const auto& inst : scene.instances) {
        local.clear();
        const Ray lray = inst.transform.ray_to_local(ray);
        const double s = inst.transform.scale;
        if (!inst.field->sigma_spans(lray, t0 / s, t1 / s, local)) return false;
        for (const SigmaSpan& sp : local)
            spans.push_back({sp.t0 * s, sp.t1 * s, sp.sigma / s});
    }
    // Flatten overlapping spans into disjoint constant segments.
    events.clear();
    events.push_back(t0);
    events.push_back(t1);
    for (const SigmaSpan& sp : spans) {
        events.push_back(sp.t0);
        events.push_back(sp.t1);
    }
    std::sort(events.begin(), events.end());
    std::vector<SigmaSpan> flat;
    for (size_t i = 0; i + 1 < events.size(); ++i) {
        const double a = events[i], b = events[i + 1];
        if (b - a <= 0.0) continue;
        double sigma = 0.0;
        const double mid = 0.5 * (a + b);
        for (const SigmaSpan& sp : spans)
            if (mid >= sp.t0 && mid < sp.t1) sigma += sp.sigma;
        flat.push_back({a, b, sigma});
    }
    spans = std::move(flat);
    return true;
}

struct Collision {
    bool hit = false;
    double t = 0.0;
};

// Free-flight sampling through the piecewise-constant profile: pdf(t) =
// sigma(t) exp(-od(t)), escape probability exp(-total od).
inline Collision sample_free_flight_profile(const std::vector<SigmaSpan>& spans, double u) {
    double target = -std::log(1.0 - u);
    for (const SigmaSpan& sp : spans) {
        if (sp.sigma <= 0.0) continue;
        const double od = sp.sigma * (sp.t1 - sp.t0);
        if (target <= od) return {true, sp.t0 + target / sp.sigma};
        target -= od;
    }
    return {};
}

// Ratio tracking against the summed instance majorants; unbiased for
// procedural and grid interiors.
inline Collision sample_free_flight_tracking(const SceneDescription& scene, const Ray& ray,
                                             double t0, double t1, Rng& rng) {
    double maj = 0.0;
    for (const auto& inst : scene.instances) maj += inst.field->majorant() / inst.transform.scale;
    if (maj <= 0.0) return {};
    double t = t0;
    for (;;) {
        t += -std::log(1.0 - rng.next()) / maj;
        if (t >= t1) return {};
        if (rng.next() * maj < medium_at(scene, ray.at(t)).sigma) return {true, t};
    }
}

inline bool scene_has_sigma_spans(const SceneDescription& scene) {
    std::vector<SigmaSpan> scratch;
    for (const auto& inst : scene.instances)
        if (!inst.field->sigma_spans({{0, 0, 0}, {0, 0, 1}}, 0.0, 0.0, scratch)) return false;
    return true;
}

// Transmittance from p to the scene boundary along w.
inline double transmittance_to_infinity(const SceneDescription& scene, const Vec3& p,
                                        const Vec3& w, int steps) {
    auto span = ray_bounds(scene, {p, w});
    if (!span) return 1.0;
    return transmittance(scene, p, p + w * span->t1, steps);
}

}  // namespace detail

// Records one light-path contribution along with how many scattering events
// the light underwent before reaching the sensor/probe origin.
using ContributionSink = std::function<void(int scatter_events, const Rgb&)>;

// Unidirectional volumetric path tracing with next-event estimation at every
// scattering vertex. The point light is a delta emitter reachable only via
// NEE; the environment term is likewise collected via one sampled direction
// per vertex, so escaping rays contribute only on camera-direct (zero-event)
// paths. The background is a backdrop seen through the medium, not an
// emitter.
inline void trace_volume_path(const SceneDescription& scene, Ray ray,
                              const LightCondition& light, const PathTracerConfig& cfg,
                              Rng& rng, const ContributionSink& sink) {
    Rgb throughput{1.0, 1.0, 1.0};
    const bool exact = detail::scene_has_sigma_spans(scene);
    std::vector<SigmaSpan> spans;
    std::vector<double> events;
    for (int bounce = 0;; ++bounce) {
        auto span = ray_bounds(scene, ray);
        detail::Collision hit;
        if (span) {
            if (exact) {
                detail::build_sigma_profile(scene, ray, span->t0, span->t1, spans, events);
                hit = detail::sample_free_flight_profile(spans, rng.next());
            } else {
                hit = detail::sample_free_flight_tracking(scene, ray, span->t0, span->t1, rng);
            }
        }
        if (!hit.hit) {
            if (bounce == 0) {
                Rgb view = scene.background;
                if (light.env) view += env_radiance(scene.env_sh, ray.d);
                sink(0, throughput * view);
            }
            return;
        }

        const Vec3 p = ray.at(hit.t);
        const MediumSample s = medium_at(scene, p);
        const Vec3 w_o = -ray.d;
        const int event = bounce + 1;

        // Next-event estimation: point light.
        if (light.intensity > 0.0) {
            const Vec3 to_light = light.position - p;
            const double d2 = length_sq(to_light);
            const Vec3 w_l = to_light / std::sqrt(d2);
            const double tr = transmittance(scene, p, light.position, cfg.transmittance_steps);
            const double phase = hg_eval(w_o, w_l, s.g);
            sink(event, throughput * s.albedo * (phase * light.intensity / d2 * tr));
        }
        // Next-event estimation: environment, one uniform direction.
        if (light.env) {
            const Vec3 w_e = square_to_sphere(rng.next(), rng.next());
            const double tr =
                detail::transmittance_to_infinity(scene, p, w_e, cfg.transmittance_steps);
            const double phase = hg_eval(w_o, w_e, s.g);
            const Rgb le = env_radiance(scene.env_sh, w_e);
            sink(event, throughput * s.albedo * le * (phase * tr * kFourPi));
        }

        if (bounce + 1 >= cfg.max_bounces) return;

        // Scatter: albedo into throughput; the phase pdf cancels exactly.
        throughput = throughput * s.albedo;
        if (bounce + 1 >= cfg.rr_start) {
            const double p_cont = std::clamp(luminance(throughput), cfg.rr_floor, 1.0);
            if (rng.next() >= p_cont) return;
            throughput = throughput / p_cont;
        }
        const auto [w_i, pdf] = hg_sample(w_o, s.g, rng.next(), rng.next());
        ray = {p, w_i};
    }
}

// Ground-truth renderer. The direct layer holds single-scattered light plus
// the background/environment seen straight through the medium; the indirect
// layer holds everything that scattered at least twice.
inline HdrImage render_reference(const SceneDescription& scene, const Camera& camera,
                                 const LightCondition& light, const PathTracerConfig& cfg,
                                 int threads = 0) {
    cfg.validate();
    if (camera.width < 1 || camera.height < 1)
        throw std::domain_error("render_reference: degenerate camera resolution");
    if (threads <= 0) threads = hardware_threads();
    HdrImage image(camera.width, camera.height);
    image.alloc_layers();

    parallel_chunks(camera.height, threads, [&](int y) {
        for (int x = 0; x < camera.width; ++x) {
            const uint64_t pixel = uint64_t(y) * camera.width + x;
            Rgb direct, indirect;
            for (int sample = 0; sample < cfg.spp; ++sample) {
                Rng rng(cfg.seed, pixel, uint64_t(sample));
                Ray ray = cfg.pixel_jitter
                              ? camera.primary_ray(x + rng.next(), y + rng.next())
                              : camera.pixel_center_ray(x, y);
                trace_volume_path(scene, ray, light, cfg, rng,
                                  [&](int event, const Rgb& value) {
                                      if (!is_finite(value))
                                          throw numerical_error(
                                              "render_reference: non-finite sample");
                                      if (event <= 1)
                                          direct += value;
                                      else
                                          indirect += value;
                                  });
            }
            direct = direct / double(cfg.spp);
            indirect = indirect / double(cfg.spp);
            image.direct[pixel] = direct;
            image.indirect[pixel] = indirect;
            image.rgb[pixel] = direct + indirect;
        }
    });
    return image;
}

struct SingleScatterConfig {
    int n_march = 256;           // outer quadrature points along the camera ray
    int env_dirs = 32;           // stratified environment shadow directions
    int transmittance_steps = 256;
    uint64_t seed = 0;
};

// Single scattering at one medium point (the Ls integrand): one shadow ray to
// the point light, stratified directions for the environment.
inline Rgb single_scatter_at(const SceneDescription& scene, const Vec3& p, const Vec3& w_o,
                             const MediumSample& s, const LightCondition& light,
                             const SingleScatterConfig& cfg, Rng& rng) {
    Rgb ls;
    if (light.intensity > 0.0) {
        const Vec3 to_light = light.position - p;
        const double d2 = length_sq(to_light);
        const Vec3 w_l = to_light / std::sqrt(d2);
        const double tr = transmittance(scene, p, light.position, cfg.transmittance_steps);
        ls += s.albedo * (hg_eval(w_o, w_l, s.g) * light.intensity / d2 * tr);
    }
    if (light.env) {
        auto dirs = sample_sphere(SphereSampling::stratified, cfg.env_dirs, rng);
        Rgb acc;
        for (const Vec3& w : dirs) {
            const double tr =
                detail::transmittance_to_infinity(scene, p, w, cfg.transmittance_steps);
            acc += env_radiance(scene.env_sh, w) * (hg_eval(w_o, w, s.g) * tr);
        }
        ls += s.albedo * acc * (kFourPi / cfg.env_dirs);
    }
    return ls;
}

// Deterministic ray-marched estimate of the single-scattering image; converges
// to the path tracer's direct layer.
inline HdrImage single_scatter_reference(const SceneDescription& scene, const Camera& camera,
                                         const LightCondition& light,
                                         const SingleScatterConfig& cfg, int threads = 0) {
    if (cfg.n_march < 1 || cfg.env_dirs < 1)
        throw std::domain_error("single_scatter_reference: counts must be >= 1");
    if (threads <= 0) threads = hardware_threads();
    HdrImage image(camera.width, camera.height);

    parallel_chunks(camera.height, threads, [&](int y) {
        for (int x = 0; x < camera.width; ++x) {
            const uint64_t pixel = uint64_t(y) * camera.width + x;
            const Ray ray = camera.pixel_center_ray(x, y);
            Rgb out;
            double residual = 1.0;
            if (auto span = ray_bounds(scene, ray)) {
                const double dt = (span->t1 - span->t0) / cfg.n_march;
                double tau = 1.0;
                for (int j = 0; j < cfg.n_march; ++j) {
                    const Vec3 p = ray.at(span->t0 + (j + 0.5) * dt);
                    const MediumSample s = medium_at(scene, p);
                    if (s.sigma <= 0.0) continue;
                    const double alpha = 1.0 - std::exp(-s.sigma * dt);
                    Rng rng(cfg.seed, pixel, uint64_t(j));
                    out += tau * alpha * single_scatter_at(scene, p, -ray.d, s, light, cfg, rng);
                    tau *= 1.0 - alpha;
                }
                residual = tau;
            }
            Rgb view = scene.background;
            if (light.env) view += env_radiance(scene.env_sh, ray.d);
            image.rgb[pixel] = out + view * residual;
        }
    });
    return image;
}

// Brute-force estimate of incident radiance at p carried by light that
// scattered at least `min_bounces` times before arriving. This is the ground
// truth the learned SH field approximates.
inline std::vector<std::pair<Vec3, Rgb>> incident_radiance_probe(
    const SceneDescription& scene, const Vec3& p, const LightCondition& light, int n_dirs,
    int spp_per_dir, const PathTracerConfig& cfg, int min_bounces = 1) {
    cfg.validate();
    std::vector<std::pair<Vec3, Rgb>> out;
    out.reserve(n_dirs);
    Rng dir_rng(cfg.seed, 0x70726f62u);  // direction stream
    for (int d = 0; d < n_dirs; ++d) {
        const Vec3 w = square_to_sphere(dir_rng.next(), dir_rng.next());
        Rgb acc;
        for (int sample = 0; sample < spp_per_dir; ++sample) {
            Rng rng(cfg.seed, 0x70617468u + uint64_t(d), uint64_t(sample));
            trace_volume_path(scene, {p, w}, light, cfg, rng,
                              [&](int event, const Rgb& value) {
                                  if (event >= min_bounces) acc += value;
                              });
        }
        out.emplace_back(w, acc / double(spp_per_dir));
    }
    return out;
}

// Trilinear lattice of probe-projected SH coefficients over given bounds.
// Substitutes for the learned SH field when validating the neural marcher
// against ground truth.
class ProbeShGrid {
public:
    static ProbeShGrid build(const SceneDescription& scene, const LightCondition& light,
                             int l_max, const Aabb& bounds, int res, int n_dirs, int spp_per_dir,
                             const PathTracerConfig& cfg, int threads = 0) {
        if (res < 2) throw std::domain_error("ProbeShGrid: resolution must be >= 2");
        if (threads <= 0) threads = hardware_threads();
        ProbeShGrid grid;
        grid.l_max_ = l_max;
        grid.res_ = res;
        grid.bounds_ = bounds;
        grid.coeffs_.resize(size_t(res) * res * res * sh_count(l_max));
        parallel_chunks(res, threads, [&](int ix) {
            std::vector<Vec3> dirs;
            std::vector<Rgb> values;
            for (int iy = 0; iy < res; ++iy)
                for (int iz = 0; iz < res; ++iz) {
                    const uint64_t voxel = (uint64_t(ix) * res + iy) * res + iz;
                    const Vec3 p = grid.center(ix, iy, iz);
                    PathTracerConfig probe_cfg = cfg;
                    probe_cfg.seed = Rng::mix(cfg.seed ^ (voxel + 1));
                    auto samples = incident_radiance_probe(scene, p, light, n_dirs, spp_per_dir,
                                                           probe_cfg, 1);
                    dirs.clear();
                    values.clear();
                    for (auto& [w, v] : samples) {
                        dirs.push_back(w);
                        values.push_back(v);
                    }
                    const ShCoefficients c =
                        sh_project_samples(l_max, dirs, values, 1e-6);
                    Rgb* dst = grid.voxel(ix, iy, iz);
                    for (int k = 0; k < sh_count(l_max); ++k) dst[k] = c.c[k];
                }
        });
        return grid;
    }

    int l_max() const { return l_max_; }

    ShCoefficients at(const Vec3& p) const {
        ShCoefficients out = ShCoefficients::zeros(l_max_);
        const Vec3 ext = bounds_.extent();
        auto coord = [&](double v, double lo, double e) {
            return std::clamp((v - lo) / e * res_ - 0.5, 0.0, double(res_ - 1));
        };
        const double gx = coord(p.x, bounds_.lo.x, ext.x);
        const double gy = coord(p.y, bounds_.lo.y, ext.y);
        const double gz = coord(p.z, bounds_.lo.z, ext.z);
        const int x0 = std::min(int(gx), res_ - 2), y0 = std::min(int(gy), res_ - 2),
                  z0 = std::min(int(gz), res_ - 2);
        const double fx = gx - x0, fy = gy - y0, fz = gz - z0;
        for (int dx = 0; dx < 2; ++dx) {
            const double wx = dx ? fx : 1.0 - fx;
            for (int dy = 0; dy < 2; ++dy) {
                const double wxy = wx * (dy ? fy : 1.0 - fy);
                for (int dz = 0; dz < 2; ++dz) {
                    const double w = wxy * (dz ? fz : 1.0 - fz);
                    const Rgb* src = voxel(x0 + dx, y0 + dy, z0 + dz);
                    for (int k = 0; k < sh_count(l_max_); ++k) out.c[k] += src[k] * w;
                }
            }
        }
        return out;
    }

private:
    Vec3 center(int ix, int iy, int iz) const {
        const Vec3 ext = bounds_.extent();
        return {bounds_.lo.x + (ix + 0.5) / res_ * ext.x,
                bounds_.lo.y + (iy + 0.5) / res_ * ext.y,
                bounds_.lo.z + (iz + 0.5) / res_ * ext.z};
    }
    Rgb* voxel(int ix, int iy, int iz) {
        return &coeffs_[((size_t(ix) * res_ + iy) * res_ + iz) * sh_count(l_max_)];
    }
    const Rgb* voxel(int ix, int iy, int iz) const {
        return &coeffs_[((size_t(ix) * res_ + iy) * res_ + iz) * sh_count(l_max_)];
    }

    int l_max_ = 0;
    int res_ = 0;
    Aabb bounds_;
    std::vector<Rgb> coeffs_;
};

}  // namespace nm
