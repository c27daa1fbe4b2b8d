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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace splatlight {

// Split-sum lookup table for the dielectric Cook-Torrance specular integral:
// I_BRDF(rho, cos_theta) = F0 * F1 + F2 with F0 = 0.04 and metallic fixed at
// zero. Microfacet model: GGX distribution with alpha = rho^2, Smith
// height-correlated visibility, Schlick Fresnel split into the (1-Fc) and Fc
// parts.

inline constexpr double kRhoMin = 0.03;
inline constexpr double kFresnelF0 = 0.04;

inline double ggx_distribution(double NoH, double alpha) {
    double a2 = alpha * alpha;
    double d = NoH * NoH * (a2 - 1.0) + 1.0;
    return a2 / (kPi * d * d);
}

// Height-correlated Smith visibility V = G / (4 NoV NoL).
inline double smith_visibility(double NoV, double NoL, double alpha) {
    double a2 = alpha * alpha;
    double ggxv = NoL * std::sqrt(NoV * NoV * (1.0 - a2) + a2);
    double ggxl = NoV * std::sqrt(NoL * NoL * (1.0 - a2) + a2);
    return 0.5 / (ggxv + ggxl);
}

// Half vector distributed as D(h) NoH, z-up frame.
inline Vec3 importance_sample_ggx(double u1, double u2, double alpha) {
    double phi = 2.0 * kPi * u1;
    double a2 = alpha * alpha;
    double cos_theta2 = (1.0 - u2) / (1.0 + (a2 - 1.0) * u2);
    double cos_theta = std::sqrt(cos_theta2);
    double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta2));
    return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
}

struct BrdfLut {
    int resolution = 0;
    // (F1, F2) pairs, cos-theta-major: texel (i_cos, j_rough) lives at
    // (i_cos * resolution + j_rough) * 2.
    std::vector<float> data;

    double cos_theta_at(int i) const { return double(i + 1) / resolution; }
    double roughness_at(int j) const {
        return kRhoMin + double(j) * (1.0 - kRhoMin) / (resolution - 1);
    }

    std::pair<double, double> at(int i_cos, int j_rough) const {
        size_t k = (size_t(i_cos) * resolution + j_rough) * 2;
        return {data[k], data[k + 1]};
    }
};

// Split-sum integral at one (cos_theta, rho) via GGX importance sampling.
// Strata of the unit square are jittered with the caller's generator, which
// keeps every texel deterministic under its own seed.
inline std::pair<double, double> integrate_brdf_point(double cos_theta, double rho,
                                                      int samples, Rng& rng) {
    const double alpha = std::max(rho, kRhoMin) * std::max(rho, kRhoMin);
    const double nov = std::max(cos_theta, 1e-8);
    const Vec3 v{std::sqrt(std::max(0.0, 1.0 - nov * nov)), 0.0, nov};

    int grid = static_cast<int>(std::lround(std::sqrt(double(samples))));
    bool stratified = grid * grid == samples;

    double f1 = 0, f2 = 0;
    for (int s = 0; s < samples; ++s) {
        double u1, u2;
        if (stratified) {
            int gx = s % grid, gy = s / grid;
            u1 = (gx + rng.uniform()) / grid;
            u2 = (gy + rng.uniform()) / grid;
        } else {
            u1 = rng.uniform();
            u2 = rng.uniform();
        }
        Vec3 h = importance_sample_ggx(u1, u2, alpha);
        Vec3 l = h * (2.0 * v.dot(h)) - v;
        if (l.z <= 0) continue;
        double nol = l.z;
        double noh = std::max(h.z, 1e-12);
        double voh = std::max(v.dot(h), 1e-12);
        double vis = smith_visibility(nov, nol, alpha);
        double g_vis = vis * nol * (voh / noh);
        double fc = std::pow(1.0 - voh, 5.0);
        f1 += g_vis * (1.0 - fc);
        f2 += g_vis * fc;
    }
    double norm = 4.0 / samples;
    return {f1 * norm, f2 * norm};
}

inline BrdfLut bake_brdf_lut(int resolution, int samples_per_texel, uint64_t seed = 0) {
    if (resolution < 16) throw std::invalid_argument("brdf: resolution below 16");
    if (samples_per_texel < 256) throw std::invalid_argument("brdf: fewer than 256 samples");
    BrdfLut lut;
    lut.resolution = resolution;
    lut.data.resize(size_t(resolution) * resolution * 2);
    parallel_for(size_t(resolution), std::thread::hardware_concurrency(), [&](size_t row) {
        int i = static_cast<int>(row);
        for (int j = 0; j < resolution; ++j) {
            Rng rng(mix_seed(seed, uint64_t(i) * resolution + j));
            auto [f1, f2] =
                integrate_brdf_point(lut.cos_theta_at(i), lut.roughness_at(j),
                                     samples_per_texel, rng);
            size_t k = (size_t(i) * resolution + j) * 2;
            lut.data[k] = static_cast<float>(f1);
            lut.data[k + 1] = static_cast<float>(f2);
        }
    });
    return lut;
}

namespace detail {

struct LutQuery {
    int i0, i1, j0, j1;
    double fu, fv;      // interpolation fractions
    double du, dv;      // d(index)/d(cos_theta), d(index)/d(roughness)
    bool rho_clamped, cos_clamped;
};

inline LutQuery lut_locate(const BrdfLut& lut, double roughness, double cos_theta) {
    const int n = lut.resolution;
    LutQuery q;
    double rho = std::clamp(roughness, kRhoMin, 1.0);
    q.rho_clamped = roughness < kRhoMin || roughness > 1.0;
    double ct = std::clamp(cos_theta, 1e-4, 1.0);
    q.cos_clamped = cos_theta < 1e-4 || cos_theta > 1.0;

    double u = std::clamp(ct * n - 1.0, 0.0, double(n - 1));
    q.cos_clamped = q.cos_clamped || (ct * n - 1.0) < 0.0;
    double v = (rho - kRhoMin) / (1.0 - kRhoMin) * (n - 1);

    q.i0 = std::min(int(u), n - 2);
    q.i1 = q.i0 + 1;
    q.j0 = std::min(int(v), n - 2);
    q.j1 = q.j0 + 1;
    q.fu = u - q.i0;
    q.fv = v - q.j0;
    q.du = double(n);
    q.dv = double(n - 1) / (1.0 - kRhoMin);
    return q;
}

}  // namespace detail

inline std::pair<double, double> sample_brdf_lut(const BrdfLut& lut, double roughness,
                                                 double cos_theta) {
    auto q = detail::lut_locate(lut, roughness, cos_theta);
    auto blend = [&](int c) {
        auto a00 = lut.at(q.i0, q.j0), a10 = lut.at(q.i1, q.j0);
        auto a01 = lut.at(q.i0, q.j1), a11 = lut.at(q.i1, q.j1);
        auto pick = [&](const std::pair<double, double>& p) { return c == 0 ? p.first : p.second; };
        double lo = pick(a00) * (1 - q.fu) + pick(a10) * q.fu;
        double hi = pick(a01) * (1 - q.fu) + pick(a11) * q.fu;
        return lo * (1 - q.fv) + hi * q.fv;
    };
    return {blend(0), blend(1)};
}

// Partial derivatives of the bilinear lookup w.r.t. (roughness, cos_theta).
// Zero when the query clamped at a boundary.
struct BrdfLutGrad {
    double f1, f2;
    double df1_drho, df2_drho;
    double df1_dcos, df2_dcos;
};

inline BrdfLutGrad sample_brdf_lut_grad(const BrdfLut& lut, double roughness, double cos_theta) {
    auto q = detail::lut_locate(lut, roughness, cos_theta);
    auto a00 = lut.at(q.i0, q.j0), a10 = lut.at(q.i1, q.j0);
    auto a01 = lut.at(q.i0, q.j1), a11 = lut.at(q.i1, q.j1);
    BrdfLutGrad g{};
    auto channel = [&](double v00, double v10, double v01, double v11, double& val,
                       double& drho, double& dcos) {
        double lo = v00 * (1 - q.fu) + v10 * q.fu;
        double hi = v01 * (1 - q.fu) + v11 * q.fu;
        val = lo * (1 - q.fv) + hi * q.fv;
        double dval_dfu = (v10 - v00) * (1 - q.fv) + (v11 - v01) * q.fv;
        double dval_dfv = hi - lo;
        dcos = q.cos_clamped ? 0.0 : dval_dfu * q.du;
        drho = q.rho_clamped ? 0.0 : dval_dfv * q.dv;
    };
    channel(a00.first, a10.first, a01.first, a11.first, g.f1, g.df1_drho, g.df1_dcos);
    channel(a00.second, a10.second, a01.second, a11.second, g.f2, g.df2_drho, g.df2_dcos);
    return g;
}

// ---------------------------------------------------------------------------
// Binary file: "BRDFLUT1", u32 resolution, row-major f32 (F1, F2) pairs,
// all little-endian.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32_le(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

inline void write_f32_le(std::ostream& os, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    write_u32_le(os, v);
}

inline float read_f32_le(std::istream& is) {
    uint32_t v = read_u32_le(is);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace detail

inline void save_brdf_lut(const BrdfLut& lut, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("brdf: cannot open for writing: " + path);
    os.write("BRDFLUT1", 8);
    detail::write_u32_le(os, static_cast<uint32_t>(lut.resolution));
    for (float f : lut.data) detail::write_f32_le(os, f);
    if (!os) throw std::runtime_error("brdf: write failed: " + path);
}

inline BrdfLut load_brdf_lut(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("brdf: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "BRDFLUT1", 8) != 0)
        throw std::runtime_error("brdf: bad magic in " + path);
    BrdfLut lut;
    lut.resolution = static_cast<int>(detail::read_u32_le(is));
    if (lut.resolution < 2 || lut.resolution > 16384)
        throw std::runtime_error("brdf: implausible resolution in " + path);
    lut.data.resize(size_t(lut.resolution) * lut.resolution * 2);
    for (float& f : lut.data) f = detail::read_f32_le(is);
    if (!is) throw std::runtime_error("brdf: truncated table in " + path);
    return lut;
}

}  // namespace splatlight
