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
#include "camera.hpp"
#include "raster.hpp"
#include "scene.hpp"
#include "shading.hpp"

namespace splatlight {

// Offline rendering of a scene under an explicit light: shades every Gaussian
// for the view, then rasterizes. `white_sky` overrides the emissive sky with
// constant white (the evaluation convention for relit renders).

inline std::vector<RasterGaussian> assemble_raster_gaussians(
    const Scene& scene, const Camera& cam, const ShCoeffs& light, const ShCoeffs& sky_sh,
    const BrdfLut& lut, const ShadingConfig& shading = {}, bool white_sky = false) {
    const IrradianceMatrix irr = irradiance_matrix(sh_truncate(light, 2));
    const Vec3 cam_pos = cam.position();
    std::vector<RasterGaussian> rg;
    rg.reserve(scene.foreground.size() + scene.sky.size());
    for (const ForegroundGaussian& g : scene.foreground) {
        RasterGaussian r;
        r.position = g.position;
        r.rotation = g.rotation;
        r.log_scales = g.log_scales;
        r.opacity_logit = g.opacity_logit;
        r.is_sky = false;
        const Vec3 s{std::exp(g.log_scales.x), std::exp(g.log_scales.y),
                     std::exp(g.log_scales.z)};
        r.color = shade_foreground(g.rotation, s, g.position, cam_pos, g.material, light, irr,
                                   lut, shading);
        rg.push_back(r);
    }
    for (const SkyGaussian& g : scene.sky) {
        RasterGaussian r;
        r.position = sky_position(g, scene.dome);
        r.rotation = g.rotation;
        r.log_scales = g.log_scales;
        r.opacity_logit = g.opacity_logit;
        r.is_sky = true;
        r.color = white_sky ? Vec3{1, 1, 1} : shade_sky(sky_sh, r.position, cam_pos);
        rg.push_back(r);
    }
    return rg;
}

inline RenderOutput render_scene(const Scene& scene, const Camera& cam, const ShCoeffs& light,
                                 const ShCoeffs& sky_sh, const BrdfLut& lut,
                                 const RasterConfig& cfg = {}, const ShadingConfig& shading = {},
                                 ColorMode mode = ColorMode::Full, bool white_sky = false) {
    return render(assemble_raster_gaussians(scene, cam, light, sky_sh, lut, shading, white_sky),
                  cam, mode, cfg);
}

// Auxiliary attribute maps rendered by substituting per-Gaussian attributes
// for colors; sky Gaussians contribute a zero attribute so they never carry
// spurious albedo or normals.

inline ImageRGB render_attribute_map(const Scene& scene, const Camera& cam,
                                     const std::vector<Vec3>& fg_attributes,
                                     const RasterConfig& cfg = {}) {
    if (fg_attributes.size() != scene.foreground.size())
        throw std::invalid_argument("render: one attribute per foreground gaussian required");
    std::vector<RasterGaussian> rg;
    rg.reserve(scene.foreground.size() + scene.sky.size());
    for (size_t i = 0; i < scene.foreground.size(); ++i) {
        const ForegroundGaussian& g = scene.foreground[i];
        RasterGaussian r;
        r.position = g.position;
        r.rotation = g.rotation;
        r.log_scales = g.log_scales;
        r.opacity_logit = g.opacity_logit;
        r.is_sky = false;
        r.color = fg_attributes[i];
        rg.push_back(r);
    }
    for (const SkyGaussian& g : scene.sky) {
        RasterGaussian r;
        r.position = sky_position(g, scene.dome);
        r.rotation = g.rotation;
        r.log_scales = g.log_scales;
        r.opacity_logit = g.opacity_logit;
        r.is_sky = true;
        r.color = {0, 0, 0};
        rg.push_back(r);
    }
    return render(rg, cam, ColorMode::Full, cfg).color;
}

inline ImageRGB render_albedo_map(const Scene& scene, const Camera& cam,
                                  const RasterConfig& cfg = {}) {
    std::vector<Vec3> attrs;
    attrs.reserve(scene.foreground.size());
    for (const ForegroundGaussian& g : scene.foreground) attrs.push_back(clamp01(g.material.albedo));
    return render_attribute_map(scene, cam, attrs, cfg);
}

// World normals blended per pixel and mapped (n+1)/2 into displayable RGB.
inline ImageRGB render_normal_map(const Scene& scene, const Camera& cam,
                                  const RasterConfig& cfg = {}) {
    const Vec3 cam_pos = cam.position();
    std::vector<Vec3> attrs;
    attrs.reserve(scene.foreground.size());
    for (const ForegroundGaussian& g : scene.foreground) {
        const Vec3 s{std::exp(g.log_scales.x), std::exp(g.log_scales.y),
                     std::exp(g.log_scales.z)};
        attrs.push_back(
            gaussian_normal(g.rotation.normalized(), s, (cam_pos - g.position).normalized()));
    }
    ImageRGB img = render_attribute_map(scene, cam, attrs, cfg);
    for (Vec3& px : img.px) px = clamp01((px + Vec3{1, 1, 1}) * 0.5);
    return img;
}

}  // namespace splatlight
