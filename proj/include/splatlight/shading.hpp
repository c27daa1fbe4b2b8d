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

#include "brdf.hpp"
#include "common.hpp"
#include "sh.hpp"

namespace splatlight {

// Per-Gaussian physically based color: diffuse from the irradiance matrix of
// the degree-2 light truncation, specular from the roughness-blurred light
// evaluated along the reflection direction and scaled by the split-sum LUT,
// summed, clamped, and gamma corrected. Sky Gaussians are emissive in display
// space and skip all of it.

inline constexpr double kGamma = 2.2;

struct Material {
    Vec3 albedo;         // linear space, in [0,1]^3
    double roughness;    // in [0,1]
};

struct ShadingConfig {
    // Blur strength fed to the zonal kernel is roughness^blur_exponent; 2
    // reads the kernel argument as the square of the squared roughness, 1 as
    // the squared roughness.
    int blur_exponent = 2;
};

inline int shortest_axis(const Vec3& scales) {
    int k = 0;
    if (scales.y < scales[k]) k = 1;
    if (scales.z < scales[k]) k = 2;
    return k;
}

// Shortest covariance axis, oriented toward the camera. view_dir points from
// the surface to the camera.
inline Vec3 gaussian_normal(const Vec4& rotation_unit, const Vec3& scales,
                            const Vec3& view_dir) {
    if (scales.min_coeff() <= 0.0)
        throw std::invalid_argument("shading: scales must be strictly positive");
    Mat3 r = quat_to_rotation(rotation_unit);
    Vec3 n = r.col(shortest_axis(scales));
    if (n.dot(view_dir) < 0) n = -n;
    return n;
}

inline Vec3 reflect(const Vec3& view_dir, const Vec3& normal) {
    return normal * (2.0 * view_dir.dot(normal)) - view_dir;
}

inline Vec3 diffuse_color(const Material& material, const Vec3& normal,
                          const IrradianceMatrix& m) {
    Vec3 e = m.quadratic_form(normal);
    return {material.albedo.x / kPi * std::max(0.0, e.x),
            material.albedo.y / kPi * std::max(0.0, e.y),
            material.albedo.z / kPi * std::max(0.0, e.z)};
}

inline Vec3 specular_color(const Material& material, const Vec3& normal, const Vec3& view_dir,
                           const ShCoeffs& light, const BrdfLut& lut,
                           const ShadingConfig& config = {}) {
    double cos_theta = normal.dot(view_dir);
    if (cos_theta <= 0) return {0, 0, 0};
    ShCoeffs blurred = sh_gaussian_blur(light, material.roughness, config.blur_exponent);
    Vec3 radiance = eval_sh(blurred, reflect(view_dir, normal));
    radiance = {std::max(0.0, radiance.x), std::max(0.0, radiance.y),
                std::max(0.0, radiance.z)};
    auto [f1, f2] = sample_brdf_lut(lut, material.roughness, cos_theta);
    return radiance * (kFresnelF0 * f1 + f2);
}

inline double gamma_correct(double linear) { return std::pow(linear, 1.0 / kGamma); }

inline Vec3 foreground_color(const Material& material, const Vec3& normal, const Vec3& view_dir,
                             const ShCoeffs& light, const IrradianceMatrix& m,
                             const BrdfLut& lut, const ShadingConfig& config = {}) {
    Vec3 lin = clamp01(diffuse_color(material, normal, m) +
                       specular_color(material, normal, view_dir, light, lut, config));
    return {gamma_correct(lin.x), gamma_correct(lin.y), gamma_correct(lin.z)};
}

// Emissive sky radiance in display space.
inline Vec3 sky_color(const ShCoeffs& sky_sh, const Vec3& view_dir) {
    if (sky_sh.degree != 1) throw std::invalid_argument("shading: sky light must be degree 1");
    return clamp01(eval_sh(sky_sh, view_dir));
}

// ---------------------------------------------------------------------------
// Fused per-Gaussian shade with analytic adjoints. The rasterizer provides
// d(loss)/d(color); this routine pushes it onto every shading input.
// ---------------------------------------------------------------------------

struct ForegroundShadeGrads {
    Vec3 d_albedo{0, 0, 0};
    double d_roughness = 0;
    Vec4 d_quat_raw{0, 0, 0, 0};
    Vec3 d_position{0, 0, 0};     // through the view direction
    ShCoeffs d_light;             // degree 4, accumulated
};

// Forward shade for a foreground Gaussian given its raw parameters.
// view_dir = normalize(cam_pos - position).
inline Vec3 shade_foreground(const Vec4& quat_raw, const Vec3& scales, const Vec3& position,
                             const Vec3& cam_pos, const Material& material,
                             const ShCoeffs& light, const IrradianceMatrix& m,
                             const BrdfLut& lut, const ShadingConfig& config = {}) {
    Vec3 view_dir = (cam_pos - position).normalized();
    Vec3 n = gaussian_normal(quat_raw.normalized(), scales, view_dir);
    return foreground_color(material, n, view_dir, light, m, lut, config);
}

inline Vec3 shade_foreground_vjp(const Vec4& quat_raw, const Vec3& scales, const Vec3& position,
                                 const Vec3& cam_pos, const Material& material,
                                 const ShCoeffs& light, const IrradianceMatrix& m,
                                 const BrdfLut& lut, const ShadingConfig& config,
                                 const Vec3& d_color, ForegroundShadeGrads& grads) {
    // forward, keeping intermediates
    const Vec3 view_raw = cam_pos - position;
    const Vec3 wo = view_raw.normalized();
    const Vec4 q = quat_raw.normalized();
    const Mat3 rot = quat_to_rotation(q);
    const int axis = shortest_axis(scales);
    Vec3 n = rot.col(axis);
    double flip = 1.0;
    if (n.dot(wo) < 0) {
        n = -n;
        flip = -1.0;
    }

    const Vec3 e_raw = m.quadratic_form(n);
    const Vec3 diffuse{material.albedo.x / kPi * std::max(0.0, e_raw.x),
                       material.albedo.y / kPi * std::max(0.0, e_raw.y),
                       material.albedo.z / kPi * std::max(0.0, e_raw.z)};

    const double cos_theta = n.dot(wo);
    const double rho = material.roughness;
    double band_gain[kMaxShDegree + 1];
    double band_gain_drho[kMaxShDegree + 1];
    {
        // multiplier exp(-l(l+1) rho^(2e))
        double p = config.blur_exponent == 1 ? rho * rho
                                             : std::pow(rho, 2.0 * config.blur_exponent);
        double dp = config.blur_exponent == 1
                        ? 2.0 * rho
                        : 2.0 * config.blur_exponent *
                              std::pow(rho, 2.0 * config.blur_exponent - 1.0);
        for (int l = 0; l <= kMaxShDegree; ++l) {
            band_gain[l] = std::exp(-double(l * (l + 1)) * p);
            band_gain_drho[l] = band_gain[l] * -double(l * (l + 1)) * dp;
        }
    }

    Vec3 specular{0, 0, 0};
    Vec3 r{0, 0, 0};
    Vec3 rad_raw{0, 0, 0};
    double basis_r[kMaxShCoeffs] = {};
    Vec3 basis_r_grad[kMaxShCoeffs];
    BrdfLutGrad lg{};
    double ibrdf = 0;
    const bool front_facing = cos_theta > 0;
    if (front_facing) {
        r = reflect(wo, n);
        eval_sh_basis_grad(r.normalized(), light.degree, basis_r, basis_r_grad);
        for (int j = 0; j < light.count(); ++j)
            rad_raw += light.c[j] * (band_gain[sh_band_of(j)] * basis_r[j]);
        Vec3 rad = {std::max(0.0, rad_raw.x), std::max(0.0, rad_raw.y),
                    std::max(0.0, rad_raw.z)};
        lg = sample_brdf_lut_grad(lut, rho, cos_theta);
        ibrdf = kFresnelF0 * lg.f1 + lg.f2;
        specular = rad * ibrdf;
    }

    Vec3 lin_raw = diffuse + specular;
    Vec3 lin = clamp01(lin_raw);
    Vec3 color{gamma_correct(lin.x), gamma_correct(lin.y), gamma_correct(lin.z)};

    // ---- backward ----
    if (grads.d_light.degree != light.degree) grads.d_light = ShCoeffs::zeros(light.degree);

    Vec3 d_lin{0, 0, 0};
    for (int ch = 0; ch < 3; ++ch) {
        if (lin_raw[ch] <= 0.0 || lin_raw[ch] >= 1.0) continue;  // clamp plateau
        double base = std::max(lin[ch], 1e-12);
        d_lin[ch] = d_color[ch] * (1.0 / kGamma) * std::pow(base, 1.0 / kGamma - 1.0);
    }

    Vec3 d_n{0, 0, 0};
    Vec3 d_wo{0, 0, 0};

    // diffuse branch
    for (int ch = 0; ch < 3; ++ch) {
        if (e_raw[ch] > 0) {
            grads.d_albedo[ch] += d_lin[ch] * e_raw[ch] / kPi;
            double d_e = d_lin[ch] * material.albedo[ch] / kPi;
            d_n += m.quadratic_form_grad(n, ch) * d_e;
            // irradiance is linear in the degree-2 light: dE/dL_j = A_l Y_j(n)
            double basis_n[9];
            eval_sh_basis(n, 2, basis_n);
            for (int j = 0; j < 9; ++j)
                grads.d_light.c[j][ch] += d_e * irradiance_band_factor(sh_band_of(j)) * basis_n[j];
        }
    }

    // specular branch
    if (front_facing) {
        Vec3 d_rad{0, 0, 0};
        double d_ibrdf = 0;
        for (int ch = 0; ch < 3; ++ch) {
            double rad_ch = std::max(0.0, rad_raw[ch]);
            d_rad[ch] = d_lin[ch] * ibrdf * (rad_raw[ch] > 0 ? 1.0 : 0.0);
            d_ibrdf += d_lin[ch] * rad_ch;
        }
        double d_cos = d_ibrdf * (kFresnelF0 * lg.df1_dcos + lg.df2_dcos);
        grads.d_roughness += d_ibrdf * (kFresnelF0 * lg.df1_drho + lg.df2_drho);

        Vec3 d_r{0, 0, 0};
        for (int j = 0; j < light.count(); ++j) {
            int l = sh_band_of(j);
            for (int ch = 0; ch < 3; ++ch)
                grads.d_light.c[j][ch] += d_rad[ch] * band_gain[l] * basis_r[j];
            double d_blurred = light.c[j].dot(d_rad);
            grads.d_roughness += d_blurred * band_gain_drho[l] * basis_r[j];
            d_r += basis_r_grad[j] * (d_blurred * band_gain[l]);
        }

        // r = 2 (wo . n) n - wo is already unit; its basis gradient was taken
        // at r itself, so push free partials straight through
        double won = wo.dot(n);
        double ndr = n.dot(d_r);
        d_wo += n * (2.0 * ndr) - d_r;
        d_n += d_r * (2.0 * won) + wo * (2.0 * ndr);

        d_n += wo * d_cos;
        d_wo += n * d_cos;
    }

    // normal -> quaternion
    {
        Vec3 d_col = d_n * flip;
        auto jac = quat_to_rotation_jacobian(q);
        Vec4 d_q_unit{0, 0, 0, 0};
        for (int kq = 0; kq < 4; ++kq) {
            double acc = 0;
            for (int i = 0; i < 3; ++i) acc += d_col[i] * jac[kq].m[i][axis];
            d_q_unit[kq] = acc;
        }
        grads.d_quat_raw += normalize_quat_backward(quat_raw, d_q_unit);
    }

    // view direction -> position
    grads.d_position -= normalize_backward(view_raw, d_wo);

    return color;
}

struct SkyShadeGrads {
    ShCoeffs d_sky;        // degree 1
    Vec3 d_position{0, 0, 0};
};

// view_dir here points from the camera toward the sky Gaussian (the looking
// direction whose radiance the dome stores).
inline Vec3 shade_sky(const ShCoeffs& sky_sh, const Vec3& position, const Vec3& cam_pos) {
    return sky_color(sky_sh, (position - cam_pos).normalized());
}

inline Vec3 shade_sky_vjp(const ShCoeffs& sky_sh, const Vec3& position, const Vec3& cam_pos,
                          const Vec3& d_color, SkyShadeGrads& grads) {
    if (sky_sh.degree != 1) throw std::invalid_argument("shading: sky light must be degree 1");
    Vec3 view_raw = position - cam_pos;
    Vec3 dir = view_raw.normalized();
    Vec3 raw = eval_sh(sky_sh, dir);
    Vec3 color = clamp01(raw);

    if (grads.d_sky.degree != 1) grads.d_sky = ShCoeffs::zeros(1);
    Vec3 d_raw{0, 0, 0};
    for (int ch = 0; ch < 3; ++ch)
        if (raw[ch] > 0.0 && raw[ch] < 1.0) d_raw[ch] = d_color[ch];
    Vec3 d_dir = eval_sh_backward(sky_sh, dir, d_raw, &grads.d_sky);
    grads.d_position += normalize_backward(view_raw, d_dir);
    return color;
}

}  // namespace splatlight
