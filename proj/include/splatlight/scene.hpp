/*
 * Copyright (C) 2026 The Splatlight Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

#include "common.hpp"
#include "shading.hpp"

namespace splatlight {

// Two disjoint Gaussian populations: shaded foreground Gaussians free in
// Cartesian space, and emissive sky Gaussians pinned to a half-azimuth
// hemisphere dome of learnable radius. The partition is fixed at creation.

inline constexpr double kInitRoughness = 0.5;
inline constexpr double kInitOpacity = 0.1;
inline constexpr double kDefaultSkyCountScale = 40.0;
inline constexpr double kSplitScaleFactor = 1.6;
inline constexpr double kMinDomeRadius = 1e-3;

struct ForegroundGaussian {
    Vec3 position;
    Vec4 rotation{1, 0, 0, 0};  // raw; normalized on use
    Vec3 log_scales;
    double opacity_logit = 0;
    Material material;
};

struct SkyGaussian {
    double theta = 0;  // polar, from +z, in [0, pi/2]
    double phi = 0;    // azimuth, from +x, in [0, pi]
    Vec4 rotation{1, 0, 0, 0};
    Vec3 log_scales;
    double opacity_logit = 0;
};

struct SkyDome {
    Vec3 center;     // fixed after init
    double radius = 1.0;  // learnable, shared
};

struct Scene {
    std::vector<ForegroundGaussian> foreground;
    std::vector<SkyGaussian> sky;
    SkyDome dome;
};

struct PointSample {
    Vec3 position;
    Vec3 color;  // [0,1]
};

inline Vec3 sky_position(const SkyGaussian& g, const SkyDome& dome) {
    double st = std::sin(g.theta), ct = std::cos(g.theta);
    return dome.center + Vec3{st * std::cos(g.phi), st * std::sin(g.phi), ct} * dome.radius;
}

// d(position)/d(theta, phi, radius)
struct SkyPositionJacobian {
    Vec3 d_theta, d_phi, d_radius;
};

inline SkyPositionJacobian sky_position_jacobian(const SkyGaussian& g, const SkyDome& dome) {
    double st = std::sin(g.theta), ct = std::cos(g.theta);
    double cp = std::cos(g.phi), sp = std::sin(g.phi);
    SkyPositionJacobian j;
    j.d_theta = Vec3{ct * cp, ct * sp, -st} * dome.radius;
    j.d_phi = Vec3{-st * sp, st * cp, 0.0} * dome.radius;
    j.d_radius = {st * cp, st * sp, ct};
    return j;
}

template <typename G>
Mat3 covariance(const G& g) {
    Mat3 r = quat_to_rotation(g.rotation.normalized());
    Vec3 s{std::exp(g.log_scales.x), std::exp(g.log_scales.y), std::exp(g.log_scales.z)};
    Mat3 d{};
    d.m[0][0] = s.x * s.x;
    d.m[1][1] = s.y * s.y;
    d.m[2][2] = s.z * s.z;
    return r * d * r.transposed();
}

// ---------------------------------------------------------------------------
// Initialization from a seed point cloud
// ---------------------------------------------------------------------------

namespace detail {

// Nearest-neighbor distances through a uniform grid hash; quadratic fallback
// never triggers beyond tiny clouds.
inline std::vector<double> nearest_neighbor_distances(const std::vector<PointSample>& pts) {
    const size_t n = pts.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;

    Vec3 lo = pts[0].position, hi = pts[0].position;
    for (const auto& p : pts)
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p.position[k]);
            hi[k] = std::max(hi[k], p.position[k]);
        }
    double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z, 1e-9});
    // aim for a handful of points per cell
    int cells = std::max(1, int(std::cbrt(double(n) / 4.0)));
    double cell = extent / cells;

    auto key = [&](const Vec3& p) {
        auto axis = [&](double v, double l) {
            return std::min<int64_t>(cells - 1, std::max<int64_t>(0, int64_t((v - l) / cell)));
        };
        return (axis(p.x, lo.x) * 73856093) ^ (axis(p.y, lo.y) * 19349663) ^
               (axis(p.z, lo.z) * 83492791);
    };
    std::vector<std::pair<int64_t, size_t>> buckets(n);
    for (size_t i = 0; i < n; ++i) buckets[i] = {key(pts[i].position), i};
    std::sort(buckets.begin(), buckets.end());

    auto grid_coord = [&](double v, double l) {
        return std::min<int64_t>(cells - 1, std::max<int64_t>(0, int64_t((v - l) / cell)));
    };
    for (size_t i = 0; i < n; ++i) {
        const Vec3& p = pts[i].position;
        double best = std::numeric_limits<double>::infinity();
        int64_t cx = grid_coord(p.x, lo.x), cy = grid_coord(p.y, lo.y),
                cz = grid_coord(p.z, lo.z);
        for (int64_t dx = -1; dx <= 1; ++dx)
            for (int64_t dy = -1; dy <= 1; ++dy)
                for (int64_t dz = -1; dz <= 1; ++dz) {
                    int64_t x = std::clamp(cx + dx, int64_t(0), int64_t(cells - 1));
                    int64_t y = std::clamp(cy + dy, int64_t(0), int64_t(cells - 1));
                    int64_t z = std::clamp(cz + dz, int64_t(0), int64_t(cells - 1));
                    int64_t k = (x * 73856093) ^ (y * 19349663) ^ (z * 83492791);
                    auto it = std::lower_bound(buckets.begin(), buckets.end(),
                                               std::make_pair(k, size_t(0)));
                    for (; it != buckets.end() && it->first == k; ++it) {
                        if (it->second == i) continue;
                        double d = (pts[it->second].position - p).norm();
                        best = std::min(best, d);
                    }
                }
        if (!std::isfinite(best)) {
            for (size_t j = 0; j < n; ++j)
                if (j != i) best = std::min(best, (pts[j].position - p).norm());
        }
        out[i] = best;
    }
    return out;
}

}  // namespace detail

inline Scene init_scene(const std::vector<PointSample>& cloud,
                        double sky_count_scale = kDefaultSkyCountScale, uint64_t seed = 0) {
    if (cloud.size() < 4)
        throw std::invalid_argument("scene: need at least 4 seed points");

    Scene scene;

    Vec3 lo = cloud[0].position, hi = cloud[0].position, centroid{0, 0, 0};
    for (const auto& p : cloud) {
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p.position[k]);
            hi[k] = std::max(hi[k], p.position[k]);
        }
        centroid += p.position;
    }
    centroid = centroid / double(cloud.size());
    scene.dome.center = (lo + hi) * 0.5;

    std::vector<double> dist(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) dist[i] = (cloud[i].position - centroid).norm();
    std::sort(dist.begin(), dist.end());
    size_t idx = std::min(dist.size() - 1,
                          size_t(std::ceil(0.99 * double(dist.size()))) - 1);
    scene.dome.radius = std::max(dist[idx], kMinDomeRadius);

    auto nn = detail::nearest_neighbor_distances(cloud);
    scene.foreground.reserve(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        ForegroundGaussian g;
        g.position = cloud[i].position;
        g.rotation = {1, 0, 0, 0};
        double s = std::clamp(nn[i], 1e-7, scene.dome.radius);
        g.log_scales = Vec3{std::log(s), std::log(s), std::log(s)};
        g.opacity_logit = inverse_sigmoid(kInitOpacity);
        g.material.albedo = clamp01(cloud[i].color);
        g.material.roughness = kInitRoughness;
        scene.foreground.push_back(g);
    }

    int sky_count = std::max(1, int(std::lround(sky_count_scale * scene.dome.radius)));
    // initial sky footprint tracks the mean spacing on the hemisphere
    double spacing = std::sqrt(2.0 * kPi * scene.dome.radius * scene.dome.radius / sky_count);
    Rng rng(mix_seed(seed, 0x536b79u));  // sky-init stream
    scene.sky.reserve(sky_count);
    for (int i = 0; i < sky_count; ++i) {
        SkyGaussian g;
        double z = rng.uniform();
        g.theta = std::acos(z);
        g.phi = rng.uniform() * kPi;
        g.rotation = {1, 0, 0, 0};
        g.log_scales = Vec3{std::log(spacing), std::log(spacing), std::log(spacing)};
        g.opacity_logit = inverse_sigmoid(kInitOpacity);
        scene.sky.push_back(g);
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Constraint re-projection, applied after every optimizer step
// ---------------------------------------------------------------------------

inline void clamp_constraints(Scene& scene) {
    for (auto& g : scene.foreground) {
        g.material.albedo = clamp01(g.material.albedo);
        g.material.roughness = clamp01(g.material.roughness);
    }
    for (auto& g : scene.sky) {
        g.theta = std::clamp(g.theta, 0.0, 0.5 * kPi);
        g.phi = std::clamp(g.phi, 0.0, kPi);
    }
    scene.dome.radius = std::max(scene.dome.radius, kMinDomeRadius);
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

namespace detail {

template <typename G>
Vec3 sample_from_gaussian(const G& g, const Vec3& mean, Rng& rng) {
    Mat3 rot = quat_to_rotation(g.rotation.normalized());
    Vec3 s{std::exp(g.log_scales.x), std::exp(g.log_scales.y), std::exp(g.log_scales.z)};
    Vec3 xi{rng.normal(), rng.normal(), rng.normal()};
    return mean + rot * xi.cwise(s);
}

}  // namespace detail

inline std::pair<SkyGaussian, SkyGaussian> split_sky_gaussian(const SkyGaussian& g,
                                                              const SkyDome& dome, Rng& rng) {
    auto make_child = [&]() {
        SkyGaussian child = g;
        Vec3 sample;
        Vec3 offset;
        do {
            sample = detail::sample_from_gaussian(g, sky_position(g, dome), rng);
            offset = sample - dome.center;
        } while (offset.norm() < 1e-12 * std::max(1.0, dome.radius));
        Vec3 dir = offset.normalized();
        child.theta = std::clamp(std::acos(std::clamp(dir.z, -1.0, 1.0)), 0.0, 0.5 * kPi);
        child.phi = std::clamp(std::atan2(dir.y, dir.x), 0.0, kPi);
        child.log_scales = g.log_scales - Vec3{1, 1, 1} * std::log(kSplitScaleFactor);
        return child;
    };
    return {make_child(), make_child()};
}

inline std::pair<ForegroundGaussian, ForegroundGaussian> split_foreground_gaussian(
    const ForegroundGaussian& g, Rng& rng) {
    auto make_child = [&]() {
        ForegroundGaussian child = g;
        child.position = detail::sample_from_gaussian(g, g.position, rng);
        child.log_scales = g.log_scales - Vec3{1, 1, 1} * std::log(kSplitScaleFactor);
        return child;
    };
    return {make_child(), make_child()};
}

}  // namespace splatlight
