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

// Synthetic "textured wall + sky dome" scenes used by the trainer, gradient,
// and acceptance suites. World frame: z up, the wall stands in the x-z plane
// around y = 0, cameras sit at negative y looking toward +y. The sky dome's
// admissible quarter-sphere (theta in [0, pi/2], phi in [0, pi]) then covers
// directions above the horizon on the far side of the wall.

#include <string>
#include <vector>

#include "splatlight/dataset.hpp"
#include "splatlight/render_scene.hpp"
#include "splatlight/trainer.hpp"

namespace fixtures {

using namespace splatlight;

struct WallConfig {
    int wall_nx = 20, wall_ny = 10;  // grid of seed points on the wall
    double wall_width = 4.0, wall_height = 2.0;
    int views = 12;
    int image_size = 96;
    double camera_distance = 7.0;
    double camera_height = 1.2;
    double focal_scale = 1.1;      // focal = focal_scale * image_size
    double truth_opacity = 0.92;   // activated opacity of truth Gaussians
    double sky_count_scale = 25.0;
    // Foreground-coverage threshold below which a pixel counts as sky.
    // 0.5 splits at the silhouette;  a small value (e.g. 0.02) labels only
    // pixels with essentially no foreground, leaving the splats' soft
    // silhouette band out of the sky region so leak suppression does not
    // fight reconstruction there.
    double sky_mask_alpha = 0.5;
    uint64_t seed = 7;
};

inline std::vector<PointSample> wall_cloud(const WallConfig& wc) {
    std::vector<PointSample> pts;
    for (int j = 0; j < wc.wall_ny; ++j) {
        for (int i = 0; i < wc.wall_nx; ++i) {
            const double u = (i + 0.5) / wc.wall_nx;
            const double v = (j + 0.5) / wc.wall_ny;
            PointSample p;
            p.position = {(u - 0.5) * wc.wall_width,
                          0.15 * std::sin(6.0 * u) * std::cos(5.0 * v),
                          0.3 + v * wc.wall_height};
            // A smooth but contrasty texture: two color gradients plus checks.
            const double check = ((i / 2 + j / 2) % 2 == 0) ? 0.28 : 0.0;
            p.color = clamp01(Vec3{0.25 + 0.5 * u + check, 0.3 + 0.45 * v,
                                   0.55 - 0.3 * u + 0.2 * std::sin(9.0 * v) + check});
            pts.push_back(p);
        }
    }
    return pts;
}

inline Camera wall_camera(const WallConfig& wc, int view_idx, int view_count) {
    // Cameras on a shallow arc at y = -distance, all looking at the wall
    // center; +z is up (the camera frame's "down" axis maps to -z).
    const double t = view_count > 1 ? double(view_idx) / double(view_count - 1) : 0.5;
    const double angle = (t - 0.5) * 0.9;  // about +-26 degrees around the wall
    const Vec3 eye{std::sin(angle) * wc.camera_distance,
                   -std::cos(angle) * wc.camera_distance, wc.camera_height};
    const Vec3 target{0.0, 0.0, 0.3 + 0.5 * wc.wall_height};
    return look_at_camera(eye, target, Vec3{0, 0, 1}, wc.focal_scale * wc.image_size,
                          wc.image_size, wc.image_size);
}

// A family of smooth, mostly-positive degree-4 lights with distinct tints and
// band structure. Index selects the variant; all stay close enough to the
// mid-gray initialization for stable fits.
inline ShCoeffs wall_light(int index) {
    ShCoeffs sh = ShCoeffs::zeros(4);
    const double dc = 0.5 / 0.28209479177387814;  // radiance 0.5 per channel
    const Vec3 tints[] = {{1.05, 1.0, 0.9}, {0.9, 1.0, 1.1}, {1.0, 1.08, 1.0}, {1.1, 0.95, 1.05}};
    const Vec3 tint = tints[index % 4];
    sh.c[0] = Vec3{dc * tint.x, dc * tint.y, dc * tint.z};
    Rng rng(mix_seed(uint64_t(index), 0x6c6967u));
    for (int j = 1; j < sh.count(); ++j) {
        const double band_scale = 0.22 / double(sh_band_of(j));
        sh.c[j] = Vec3{band_scale * rng.uniform(-1, 1), band_scale * rng.uniform(-1, 1),
                       band_scale * rng.uniform(-1, 1)};
    }
    return sh;
}

inline ShCoeffs wall_sky(int index) {
    ShCoeffs sh = ShCoeffs::zeros(1);
    const double dc = 0.5 / 0.28209479177387814;
    sh.c[0] = (index % 2 == 0) ? Vec3{0.75 * dc, 0.85 * dc, 1.15 * dc}
                               : Vec3{1.0 * dc, 0.9 * dc, 0.8 * dc};
    sh.c[3] = {0.1, 0.05, -0.05};  // gentle gradient across the dome
    return sh;
}

struct SyntheticWall {
    Dataset data;                   // rendered views + masks + seed points
    TrainerState truth;             // the generating state (scene + lut)
    std::vector<ShCoeffs> lights;   // per-view degree-4 truth lights
    std::vector<ShCoeffs> skies;    // per-view degree-1 truth sky lights
};

// Builds the ground-truth scene from the wall cloud, renders every view under
// cycling truth lights, and derives sky masks from foreground coverage.
inline SyntheticWall make_wall_dataset(const WallConfig& wc,
                                       const std::vector<ShCoeffs>& light_cycle,
                                       const RasterConfig& raster = {},
                                       const ShadingConfig& shading = {}) {
    SyntheticWall out;
    out.data.points = wall_cloud(wc);

    for (int v = 0; v < wc.views; ++v) {
        DatasetView view;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "cam_%02d", v);
        view.id = buf;
        view.camera = wall_camera(wc, v, wc.views);
        out.data.views.push_back(std::move(view));
    }

    TrainConfig truth_cfg;
    truth_cfg.seed = wc.seed;
    truth_cfg.sky_count_scale = wc.sky_count_scale;
    truth_cfg.raster = raster;
    truth_cfg.shading = shading;
    out.truth = init_trainer(truth_cfg, out.data);
    for (ForegroundGaussian& g : out.truth.scene.foreground)
        g.opacity_logit = inverse_sigmoid(wc.truth_opacity);
    for (SkyGaussian& g : out.truth.scene.sky)
        g.opacity_logit = inverse_sigmoid(0.8);

    for (int v = 0; v < wc.views; ++v) {
        DatasetView& view = out.data.views[size_t(v)];
        const ShCoeffs light = light_cycle[size_t(v) % light_cycle.size()];
        const ShCoeffs sky = wall_sky(v % 2);
        out.lights.push_back(light);
        out.skies.push_back(sky);
        const RenderOutput ro = render_scene(out.truth.scene, view.camera, light, sky,
                                             out.truth.lut, raster, shading);
        view.image = ro.color;

        // Foreground coverage alone decides the sky mask.
        const RenderOutput fg_only = [&] {
            Scene fg_scene;
            fg_scene.dome = out.truth.scene.dome;
            fg_scene.foreground = out.truth.scene.foreground;
            return render_scene(fg_scene, view.camera, light, sky, out.truth.lut, raster,
                                shading);
        }();
        view.sky_mask = ImageGray(view.camera.width, view.camera.height);
        for (size_t p = 0; p < view.sky_mask.px.size(); ++p)
            view.sky_mask.px[p] = fg_only.alpha.px[p] < wc.sky_mask_alpha ? 1.0 : 0.0;
        view.occluder_mask = ImageGray(view.camera.width, view.camera.height);
    }
    return out;
}

}  // namespace fixtures
