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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "appearance.hpp"
#include "brdf.hpp"
#include "checkpoint.hpp"
#include "dataset.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "raster.hpp"
#include "scene.hpp"
#include "shading.hpp"

namespace splatlight {

// ---------------------------------------------------------------------------
// Training configuration. Every key is also accepted by the flat key-value
// config file (same names).
// ---------------------------------------------------------------------------

struct TrainConfig {
    int iterations = 3000;
    uint64_t seed = 0;
    double sky_count_scale = kDefaultSkyCountScale;

    // Per-group learning rates. Foreground positions and sky angles share an
    // exponentially decaying rate; everything else is constant.
    double lr_position_start = 1.6e-4;
    double lr_position_end = 1.6e-6;
    double lr_rotation = 1e-3;
    double lr_scale = 5e-3;
    double lr_opacity = 5e-2;
    double lr_albedo = 2e-3;
    double lr_roughness = 2e-4;
    double lr_mlp = 2e-4;
    double lr_embedding = 2e-4;
    double lr_dome_radius = 1e-4;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    // Adaptive density control: events every `densify_interval` iterations in
    // [densify_start, densify_end]; the positional-gradient threshold rises
    // exponentially from tau0 to tau0*exp(growth) across the window.
    int densify_start = 500;
    int densify_end = 2000;
    int densify_interval = 100;
    double densify_tau0 = 2e-4;
    double densify_growth = std::log(3.0);
    double prune_opacity = 0.005;
    // Gaussians whose largest scale is below this fraction of the dome radius
    // are cloned; larger ones are split.
    double clone_scale_fraction = 0.01;
    size_t max_gaussians = 5000;
    // One optional mid-training opacity knock-down (0 disables it).
    int opacity_reset_iteration = 0;

    int checkpoint_interval = 0;  // 0 = final checkpoint only

    LossWeights loss;
    RasterConfig raster;
    ShadingConfig shading;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument(std::string("config: ") + name +
                                            " must be non-negative and finite");
        };
        if (iterations < 0) throw std::invalid_argument("config: iterations must be >= 0");
        positive(lr_position_start, "lr_position_start");
        positive(lr_position_end, "lr_position_end");
        positive(lr_rotation, "lr_rotation");
        positive(lr_scale, "lr_scale");
        positive(lr_opacity, "lr_opacity");
        positive(lr_albedo, "lr_albedo");
        positive(lr_roughness, "lr_roughness");
        positive(lr_mlp, "lr_mlp");
        positive(lr_embedding, "lr_embedding");
        positive(lr_dome_radius, "lr_dome_radius");
        if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
            throw std::invalid_argument("config: adam betas must lie in [0, 1)");
        if (!(adam_eps > 0.0)) throw std::invalid_argument("config: adam_eps must be positive");
        if (densify_start < 0 || densify_end < densify_start)
            throw std::invalid_argument("config: densify window bounds must be ordered");
        if (densify_interval <= 0)
            throw std::invalid_argument("config: densify_interval must be positive");
        if (!(densify_tau0 > 0.0))
            throw std::invalid_argument("config: densify_tau0 must be positive");
        if (!(densify_growth >= 0.0))
            throw std::invalid_argument("config: densify_growth must be non-negative");
        if (!(prune_opacity >= 0.0 && prune_opacity < 1.0))
            throw std::invalid_argument("config: prune_opacity must lie in [0, 1)");
        if (max_gaussians == 0) throw std::invalid_argument("config: max_gaussians must be > 0");
        if (loss.warmup_iterations < 0 || loss.geometry_reg_start < 0)
            throw std::invalid_argument("config: schedule milestones must be >= 0");
        if (checkpoint_interval < 0)
            throw std::invalid_argument("config: checkpoint_interval must be >= 0");
    }
};

// Exponentially interpolated position rate; t runs over the whole schedule.
inline double position_learning_rate(const TrainConfig& cfg, int iteration) {
    if (cfg.lr_position_start <= 0.0) return 0.0;
    const double horizon = double(std::max(1, cfg.iterations - 1));
    const double t = std::clamp(double(iteration) / horizon, 0.0, 1.0);
    const double lo = std::log(cfg.lr_position_start);
    const double hi = std::log(std::max(cfg.lr_position_end, 1e-300));
    return std::exp(lo + (hi - lo) * t);
}

// Densification threshold tau(t) = tau0 * exp(growth * t_norm), where t_norm
// is the elapsed fraction of the densification window.
inline double densify_threshold(const TrainConfig& cfg, int iteration) {
    const double span = double(std::max(1, cfg.densify_end - cfg.densify_start));
    const double t =
        std::clamp(double(iteration - cfg.densify_start) / span, 0.0, 1.0);
    return cfg.densify_tau0 * std::exp(cfg.densify_growth * t);
}

// ---------------------------------------------------------------------------
// Flat key-value config file: '<key> <value>' per line, '#' comments.
// ---------------------------------------------------------------------------

inline TrainConfig parse_train_config(std::istream& is) {
    TrainConfig cfg;
    std::map<std::string, std::function<void(const std::string&)>> setters;
    auto num = [](const std::string& v) {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("config: malformed number: " + v);
        return x;
    };
    auto add_d = [&](const char* key, double* slot) {
        setters[key] = [slot, num](const std::string& v) { *slot = num(v); };
    };
    auto add_i = [&](const char* key, int* slot) {
        setters[key] = [slot, num](const std::string& v) { *slot = int(std::llround(num(v))); };
    };
    add_i("iterations", &cfg.iterations);
    setters["seed"] = [&cfg](const std::string& v) { cfg.seed = std::stoull(v); };
    add_d("sky_count_scale", &cfg.sky_count_scale);
    add_d("lr_position_start", &cfg.lr_position_start);
    add_d("lr_position_end", &cfg.lr_position_end);
    add_d("lr_rotation", &cfg.lr_rotation);
    add_d("lr_scale", &cfg.lr_scale);
    add_d("lr_opacity", &cfg.lr_opacity);
    add_d("lr_albedo", &cfg.lr_albedo);
    add_d("lr_roughness", &cfg.lr_roughness);
    add_d("lr_mlp", &cfg.lr_mlp);
    add_d("lr_embedding", &cfg.lr_embedding);
    add_d("lr_dome_radius", &cfg.lr_dome_radius);
    add_d("adam_beta1", &cfg.adam_beta1);
    add_d("adam_beta2", &cfg.adam_beta2);
    add_d("adam_eps", &cfg.adam_eps);
    add_i("densify_start", &cfg.densify_start);
    add_i("densify_end", &cfg.densify_end);
    add_i("densify_interval", &cfg.densify_interval);
    add_d("densify_tau0", &cfg.densify_tau0);
    add_d("densify_growth", &cfg.densify_growth);
    add_d("prune_opacity", &cfg.prune_opacity);
    add_d("clone_scale_fraction", &cfg.clone_scale_fraction);
    setters["max_gaussians"] = [&cfg](const std::string& v) {
        cfg.max_gaussians = std::stoull(v);
    };
    add_i("opacity_reset_iteration", &cfg.opacity_reset_iteration);
    add_i("checkpoint_interval", &cfg.checkpoint_interval);
    add_d("lambda_rec_l1", &cfg.loss.lambda_rec_l1);
    add_d("lambda_light", &cfg.loss.lambda_light);
    add_d("lambda_normal", &cfg.loss.lambda_normal);
    add_d("lambda_scale", &cfg.loss.lambda_scale);
    add_d("lambda_fg_sky", &cfg.loss.lambda_fg_sky);
    add_d("lambda_sky_depth", &cfg.loss.lambda_sky_depth);
    add_d("gamma_sky_depth", &cfg.loss.gamma_sky_depth);
    add_i("light_samples", &cfg.loss.light_samples);
    setters["literal_fg_sky_masks"] = [&cfg, num](const std::string& v) {
        cfg.loss.literal_fg_sky_masks = num(v) != 0.0;
    };
    add_i("warmup_iterations", &cfg.loss.warmup_iterations);
    add_i("geometry_reg_start", &cfg.loss.geometry_reg_start);
    add_d("alpha_min", &cfg.raster.alpha_min);
    add_d("cutoff_sigma", &cfg.raster.cutoff_sigma);
    add_i("tile_size", &cfg.raster.tile_size);
    setters["num_threads"] = [&cfg](const std::string& v) {
        cfg.raster.num_threads = unsigned(std::stoul(v));
    };
    add_i("blur_exponent", &cfg.shading.blur_exponent);

    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string key, value, extra;
        if (!(ls >> key)) continue;  // blank line
        if (!(ls >> value) || (ls >> extra))
            throw std::runtime_error("config: expected '<key> <value>' on line " +
                                     std::to_string(line_no));
        auto it = setters.find(key);
        if (it == setters.end())
            throw std::runtime_error("config: unknown key '" + key + "' on line " +
                                     std::to_string(line_no));
        it->second(value);
    }
    cfg.validate();
    return cfg;
}

inline TrainConfig parse_train_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    return parse_train_config(is);
}

// ---------------------------------------------------------------------------
// Optimizer state: per-tensor first/second moments, one shared step counter.
// ---------------------------------------------------------------------------

struct AdamMoments {
    std::vector<double> m, v;

    void resize(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
    size_t size() const { return m.size(); }
};

struct OptimizerState {
    int64_t step = 0;
    AdamMoments fg_position, fg_rotation, fg_log_scales, fg_opacity, fg_albedo, fg_roughness;
    AdamMoments sky_angles, sky_rotation, sky_log_scales, sky_opacity;
    AdamMoments dome_radius;
    AdamMoments mlp;
    AdamMoments embeddings;
};

namespace detail {

// One bias-corrected moment update of a single scalar.
struct AdamScalar {
    double b1, b2, eps, inv_c1, inv_c2;

    AdamScalar(const TrainConfig& cfg, int64_t step)
        : b1(cfg.adam_beta1),
          b2(cfg.adam_beta2),
          eps(cfg.adam_eps),
          inv_c1(1.0 / (1.0 - std::pow(cfg.adam_beta1, double(step)))),
          inv_c2(1.0 / (1.0 - std::pow(cfg.adam_beta2, double(step)))) {}

    void operator()(double& p, double g, double& m, double& v, double lr) const {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        if (lr == 0.0) return;
        p -= lr * (m * inv_c1) / (std::sqrt(v * inv_c2) + eps);
    }
};

inline size_t mlp_param_count(const AppearanceMlp& mlp) {
    auto layer = [](const DenseLayer& l) { return l.w.size() + l.b.size(); };
    return layer(mlp.trunk1) + layer(mlp.trunk2) + layer(mlp.trunk3) + layer(mlp.sky_head) +
           layer(mlp.light_dense) + layer(mlp.light_head);
}

// Visits the six layers of an MLP-shaped struct in a fixed order.
template <typename Mlp, typename Fn>
void for_each_layer(Mlp& mlp, Fn&& fn) {
    fn(mlp.trunk1, "trunk1");
    fn(mlp.trunk2, "trunk2");
    fn(mlp.trunk3, "trunk3");
    fn(mlp.sky_head, "sky_head");
    fn(mlp.light_dense, "light_dense");
    fn(mlp.light_head, "light_head");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trainer state
// ---------------------------------------------------------------------------

struct TrainerState {
    TrainConfig config;
    Scene scene;
    AppearanceMlp mlp;
    EmbeddingTable embeddings;
    std::vector<std::string> image_ids;  // embedding row <-> dataset view id
    OptimizerState opt;
    int iteration = 0;  // completed steps
    BrdfLut lut;
    // Densification accumulators over the raster order (foreground, then sky).
    std::vector<double> grad_accum;  // summed |screen-space mean gradient|
    std::vector<double> grad_count;  // steps the Gaussian was visible
};

namespace detail {

inline void size_moments(TrainerState& st) {
    const size_t nf = st.scene.foreground.size();
    const size_t ns = st.scene.sky.size();
    st.opt.fg_position.resize(3 * nf);
    st.opt.fg_rotation.resize(4 * nf);
    st.opt.fg_log_scales.resize(3 * nf);
    st.opt.fg_opacity.resize(nf);
    st.opt.fg_albedo.resize(3 * nf);
    st.opt.fg_roughness.resize(nf);
    st.opt.sky_angles.resize(2 * ns);
    st.opt.sky_rotation.resize(4 * ns);
    st.opt.sky_log_scales.resize(3 * ns);
    st.opt.sky_opacity.resize(ns);
    st.opt.dome_radius.resize(1);
    st.opt.mlp.resize(mlp_param_count(st.mlp));
    st.opt.embeddings.resize(st.embeddings.size() * size_t(kEmbeddingDim));
    st.grad_accum.assign(nf + ns, 0.0);
    st.grad_count.assign(nf + ns, 0.0);
}

}  // namespace detail

// The split-sum table is a fixed function approximation shared by every run;
// bake it once per process.
inline const BrdfLut& default_brdf_lut() {
    static const BrdfLut lut = bake_brdf_lut(64, 1024, 0);
    return lut;
}

inline TrainerState init_trainer(const TrainConfig& cfg, const Dataset& ds) {
    if (ds.views.empty()) throw std::invalid_argument("trainer: dataset has no views");
    TrainerState st;
    st.config = cfg;
    st.scene = init_scene(ds.points, cfg.sky_count_scale, cfg.seed);
    st.mlp = make_appearance_mlp(cfg.seed);
    st.embeddings = make_embedding_table(ds.views.size(), cfg.seed);
    for (const DatasetView& v : ds.views) st.image_ids.push_back(v.id);
    st.lut = default_brdf_lut();
    detail::size_moments(st);
    return st;
}

// ---------------------------------------------------------------------------
// Forward pass shared by loss evaluation, gradients, and rendering.
// ---------------------------------------------------------------------------

namespace detail {

struct ForwardPack {
    AppearanceOutput app;
    AppearanceCache cache;
    IrradianceMatrix irr;
    std::vector<RasterGaussian> rg;  // foreground first, then sky
    std::vector<Vec3> normals;       // world normals, flipped toward the camera
    std::vector<double> cam_depths;  // camera-space z of each Gaussian center
    std::vector<char> is_sky;
    std::vector<Vec3> exp_scales;
    RenderOutput out;
    RasterState rstate;
};

inline ForwardPack forward_scene(const TrainerState& st, const Camera& cam, size_t embed_idx,
                                 bool retain) {
    ForwardPack fp;
    fp.app = appearance_forward(st.mlp, st.embeddings.row(embed_idx), &fp.cache);
    fp.irr = irradiance_matrix(sh_truncate(fp.app.light, 2));

    const Vec3 cam_pos = cam.position();
    const size_t nf = st.scene.foreground.size();
    const size_t ns = st.scene.sky.size();
    fp.rg.reserve(nf + ns);
    fp.normals.reserve(nf + ns);
    fp.cam_depths.reserve(nf + ns);
    fp.is_sky.reserve(nf + ns);
    fp.exp_scales.reserve(nf + ns);

    for (const ForegroundGaussian& g : st.scene.foreground) {
        RasterGaussian r;
        r.position = g.position;
        r.rotation = g.rotation;
        r.log_scales = g.log_scales;
        r.opacity_logit = g.opacity_logit;
        r.is_sky = false;
        const Vec3 s{std::exp(g.log_scales.x), std::exp(g.log_scales.y),
                     std::exp(g.log_scales.z)};
        r.color = shade_foreground(g.rotation, s, g.position, cam_pos, g.material, fp.app.light,
                                   fp.irr, st.lut, st.config.shading);
        fp.rg.push_back(r);
        fp.exp_scales.push_back(s);
        fp.normals.push_back(
            gaussian_normal(g.rotation.normalized(), s, (cam_pos - g.position).normalized()));
        fp.cam_depths.push_back(cam.to_camera(g.position).z);
        fp.is_sky.push_back(0);
    }
    for (const SkyGaussian& g : st.scene.sky) {
        RasterGaussian r;
        r.position = sky_position(g, st.scene.dome);
        r.rotation = g.rotation;
        r.log_scales = g.log_scales;
        r.opacity_logit = g.opacity_logit;
        r.is_sky = true;
        r.color = shade_sky(fp.app.sky, r.position, cam_pos);
        const Vec3 s{std::exp(g.log_scales.x), std::exp(g.log_scales.y),
                     std::exp(g.log_scales.z)};
        fp.rg.push_back(r);
        fp.exp_scales.push_back(s);
        fp.normals.push_back(
            gaussian_normal(g.rotation.normalized(), s, (cam_pos - r.position).normalized()));
        fp.cam_depths.push_back(cam.to_camera(r.position).z);
        fp.is_sky.push_back(1);
    }

    fp.out = render(fp.rg, cam, ColorMode::Full, st.config.raster, retain ? &fp.rstate : nullptr);
    return fp;
}

struct RawLosses {
    double rec = 0, light = 0, normal = 0, scale = 0, fg_sky = 0, sky_depth = 0;
};

inline LossBreakdown weigh(const RawLosses& raw, const LossWeights& w, int iteration) {
    return total_loss(raw.rec, raw.light, raw.normal, raw.scale, raw.fg_sky, raw.sky_depth, w,
                      iteration);
}

}  // namespace detail

// Per-step gradients for every parameter group, aligned with the scene.
struct StepGradients {
    std::vector<Vec3> fg_position;
    std::vector<Vec4> fg_rotation;
    std::vector<Vec3> fg_log_scales;
    std::vector<double> fg_opacity;
    std::vector<Vec3> fg_albedo;
    std::vector<double> fg_roughness;
    std::vector<double> sky_theta, sky_phi;
    std::vector<Vec4> sky_rotation;
    std::vector<Vec3> sky_log_scales;
    std::vector<double> sky_opacity;
    double dome_radius = 0;
    AppearanceGrads mlp;
    std::vector<double> embedding;  // active image's row
    // Raster-order screen gradients and visibility, for density control.
    std::vector<double> screen_grad_norm;
    std::vector<char> visible;
};

// Forward-only loss evaluation at a given schedule position. The light
// positivity term redraws the same sample set for a fixed iteration, so this
// is a deterministic function of (state, view, iteration).
inline LossBreakdown evaluate_loss(const TrainerState& st, const DatasetView& view,
                                   size_t embed_idx, int iteration) {
    const ActiveWeights a = schedule_weights(st.config.loss, iteration);
    const detail::ForwardPack fp = detail::forward_scene(st, view.camera, embed_idx, false);
    detail::RawLosses raw;
    if (a.rec != 0.0)
        raw.rec = loss_rec(fp.out.color, view.image, view.occluder_mask,
                           st.config.loss.lambda_rec_l1)
                      .loss;
    if (a.light != 0.0) {
        Rng rng(mix_seed(st.config.seed, 0x6c696768u, uint64_t(iteration)));
        raw.light = loss_light(fp.app.light, st.config.loss.light_samples, rng).loss;
    }
    if (a.normal != 0.0)
        raw.normal = loss_normal(fp.normals, fp.out.weight_sum, fp.out.peak_pixel, fp.out.depth,
                                 view.camera, view.occluder_mask)
                         .loss;
    if (a.scale != 0.0) raw.scale = loss_scale(fp.exp_scales).loss;
    if (a.fg_sky != 0.0)
        raw.fg_sky = loss_fg_sky(fp.out.color_fg, fp.out.color_sky, view.sky_mask,
                                 view.occluder_mask, st.config.loss.literal_fg_sky_masks)
                         .loss;
    if (a.sky_depth != 0.0) {
        const auto sd = loss_sky_depth_scene(fp.cam_depths, fp.out.weight_sum, fp.is_sky,
                                             st.config.loss.gamma_sky_depth, kVisibleWeight);
        raw.sky_depth = sd.used ? sd.loss : 0.0;
    }
    return detail::weigh(raw, st.config.loss, iteration);
}

// Full forward + backward; fills `grads` and returns the loss breakdown.
inline LossBreakdown compute_gradients(const TrainerState& st, const DatasetView& view,
                                       size_t embed_idx, int iteration, StepGradients& grads) {
    const ActiveWeights a = schedule_weights(st.config.loss, iteration);
    const Camera& cam = view.camera;
    const Vec3 cam_pos = cam.position();
    detail::ForwardPack fp = detail::forward_scene(st, cam, embed_idx, true);
    const size_t nf = st.scene.foreground.size();
    const size_t ns = st.scene.sky.size();
    const size_t n = nf + ns;

    grads.fg_position.assign(nf, Vec3{0, 0, 0});
    grads.fg_rotation.assign(nf, Vec4{0, 0, 0, 0});
    grads.fg_log_scales.assign(nf, Vec3{0, 0, 0});
    grads.fg_opacity.assign(nf, 0.0);
    grads.fg_albedo.assign(nf, Vec3{0, 0, 0});
    grads.fg_roughness.assign(nf, 0.0);
    grads.sky_theta.assign(ns, 0.0);
    grads.sky_phi.assign(ns, 0.0);
    grads.sky_rotation.assign(ns, Vec4{0, 0, 0, 0});
    grads.sky_log_scales.assign(ns, Vec3{0, 0, 0});
    grads.sky_opacity.assign(ns, 0.0);
    grads.dome_radius = 0.0;
    grads.mlp = zero_grads_like(st.mlp);
    grads.embedding.assign(kEmbeddingDim, 0.0);
    grads.screen_grad_norm.assign(n, 0.0);
    grads.visible.assign(n, 0);
    for (size_t i = 0; i < n; ++i)
        grads.visible[i] = fp.out.weight_sum[i] > 0.0 ? 1 : 0;

    detail::RawLosses raw;
    RenderUpstream up;
    up.d_color_fg = ImageRGB(cam.width, cam.height);
    up.d_color_sky = ImageRGB(cam.width, cam.height);
    up.d_weight_sum.assign(n, 0.0);

    // Reconstruction: the full composite is the pixelwise sum of the layers,
    // so its gradient feeds both.
    if (a.rec != 0.0) {
        RecLossResult rec = loss_rec(fp.out.color, view.image, view.occluder_mask,
                                     st.config.loss.lambda_rec_l1);
        raw.rec = rec.loss;
        for (size_t p = 0; p < rec.d_render.px.size(); ++p) {
            up.d_color_fg.px[p] += rec.d_render.px[p] * a.rec;
            up.d_color_sky.px[p] += rec.d_render.px[p] * a.rec;
        }
    }

    // Layer separation.
    if (a.fg_sky != 0.0) {
        FgSkyLossResult fs = loss_fg_sky(fp.out.color_fg, fp.out.color_sky, view.sky_mask,
                                         view.occluder_mask, st.config.loss.literal_fg_sky_masks);
        raw.fg_sky = fs.loss;
        for (size_t p = 0; p < fs.d_fg.px.size(); ++p) {
            up.d_color_fg.px[p] += fs.d_fg.px[p] * a.fg_sky;
            up.d_color_sky.px[p] += fs.d_sky.px[p] * a.fg_sky;
        }
    }

    // Normal consistency: gradients into the depth map, the per-Gaussian
    // blend weights, and the normals themselves.
    NormalLossResult nl;
    if (a.normal != 0.0) {
        nl = loss_normal(fp.normals, fp.out.weight_sum, fp.out.peak_pixel, fp.out.depth, cam,
                         view.occluder_mask);
        raw.normal = nl.loss;
        up.d_depth = ImageGray(cam.width, cam.height);
        for (size_t p = 0; p < nl.d_depth.px.size(); ++p)
            up.d_depth.px[p] = nl.d_depth.px[p] * a.normal;
        for (size_t i = 0; i < n; ++i) up.d_weight_sum[i] += nl.d_weights[i] * a.normal;
    }

    // Sky-behind-foreground ordering on per-Gaussian camera depths.
    SkyDepthSceneResult sd;
    if (a.sky_depth != 0.0) {
        sd = loss_sky_depth_scene(fp.cam_depths, fp.out.weight_sum, fp.is_sky,
                                  st.config.loss.gamma_sky_depth, kVisibleWeight);
        raw.sky_depth = sd.used ? sd.loss : 0.0;
    }

    // Flattening regularizer on activated scales.
    ScaleLossResult sc;
    if (a.scale != 0.0) {
        sc = loss_scale(fp.exp_scales);
        raw.scale = sc.loss;
    }

    // Light positivity on the decoded degree-4 environment.
    ShCoeffs d_light_total = ShCoeffs::zeros(kLightShDegree);
    if (a.light != 0.0) {
        Rng rng(mix_seed(st.config.seed, 0x6c696768u, uint64_t(iteration)));
        LightLossResult ll = loss_light(fp.app.light, st.config.loss.light_samples, rng);
        raw.light = ll.loss;
        for (int j = 0; j < d_light_total.count(); ++j)
            d_light_total.c[j] += ll.d_light.c[j] * a.light;
    }

    // Rasterizer backward.
    RasterGrads rg = render_backward(fp.rg, cam, up, fp.rstate, st.config.raster);
    for (size_t i = 0; i < n; ++i)
        grads.screen_grad_norm[i] = std::sqrt(rg.d_mean2d[i].dot(rg.d_mean2d[i]));

    // Camera-space depth gradient direction (third rotation row, transposed).
    const Vec3 depth_dir{cam.rotation.m[2][0], cam.rotation.m[2][1], cam.rotation.m[2][2]};

    ShCoeffs d_sky_sh_total = ShCoeffs::zeros(kSkyShDegree);
    for (size_t i = 0; i < n; ++i) {
        Vec3 d_position = rg.d_position[i];
        Vec4 d_rotation = rg.d_rotation[i];
        Vec3 d_log_scales = rg.d_log_scales[i];
        const double d_opacity = rg.d_opacity_logit[i];

        if (a.sky_depth != 0.0 && sd.used)
            d_position += depth_dir * (sd.d_depths[i] * a.sky_depth);
        if (a.scale != 0.0) {
            // activated scale s = exp(log s): chain through the exponential
            d_log_scales += sc.d_scales[i].cwise(fp.exp_scales[i]) * a.scale;
        }
        if (a.normal != 0.0) {
            // normal = flip * R(q_unit).col(shortest axis); the flip and the
            // axis choice are locally constant
            const Vec3 view_dir = (cam_pos - fp.rg[i].position).normalized();
            const Vec4 q = fp.rg[i].rotation.normalized();
            const Mat3 rot = quat_to_rotation(q);
            const int axis = shortest_axis(fp.exp_scales[i]);
            const double flip = rot.col(axis).dot(view_dir) < 0 ? -1.0 : 1.0;
            const Vec3 d_col = nl.d_normals[i] * (flip * a.normal);
            const auto jac = quat_to_rotation_jacobian(q);
            Vec4 d_q_unit{0, 0, 0, 0};
            for (int kq = 0; kq < 4; ++kq) {
                double acc = 0;
                for (int r = 0; r < 3; ++r) acc += d_col[r] * jac[kq].m[r][axis];
                d_q_unit[kq] = acc;
            }
            d_rotation += normalize_quat_backward(fp.rg[i].rotation, d_q_unit);
        }

        if (i < nf) {
            const ForegroundGaussian& g = st.scene.foreground[i];
            ForegroundShadeGrads sg;
            shade_foreground_vjp(g.rotation, fp.exp_scales[i], g.position, cam_pos, g.material,
                                 fp.app.light, fp.irr, st.lut, st.config.shading, rg.d_color[i],
                                 sg);
            grads.fg_albedo[i] = sg.d_albedo;
            grads.fg_roughness[i] = sg.d_roughness;
            d_rotation += sg.d_quat_raw;
            d_position += sg.d_position;
            for (int j = 0; j < d_light_total.count(); ++j)
                d_light_total.c[j] += sg.d_light.c[j];
            grads.fg_position[i] = d_position;
            grads.fg_rotation[i] = d_rotation;
            grads.fg_log_scales[i] = d_log_scales;
            grads.fg_opacity[i] = d_opacity;
        } else {
            const size_t k = i - nf;
            const SkyGaussian& g = st.scene.sky[k];
            SkyShadeGrads sg;
            shade_sky_vjp(fp.app.sky, fp.rg[i].position, cam_pos, rg.d_color[i], sg);
            d_position += sg.d_position;
            for (int j = 0; j < d_sky_sh_total.count(); ++j)
                d_sky_sh_total.c[j] += sg.d_sky.c[j];
            const SkyParamGrads pg = sky_param_grads(g, st.scene.dome, d_position);
            grads.sky_theta[k] = pg.d_theta;
            grads.sky_phi[k] = pg.d_phi;
            grads.dome_radius += pg.d_radius;
            grads.sky_rotation[k] = d_rotation;
            grads.sky_log_scales[k] = d_log_scales;
            grads.sky_opacity[k] = d_opacity;
        }
    }

    // Through the appearance network into the MLP and the embedding row.
    grads.embedding =
        appearance_backward(st.mlp, fp.cache, d_light_total, d_sky_sh_total, &grads.mlp);

    return detail::weigh(raw, st.config.loss, iteration);
}

namespace detail {

inline void check_finite_breakdown(const LossBreakdown& b, int iteration) {
    auto check = [iteration](double v, const char* name) {
        if (!std::isfinite(v))
            throw std::runtime_error("train: non-finite " + std::string(name) +
                                     " loss at iteration " + std::to_string(iteration));
    };
    check(b.rec, "rec");
    check(b.light, "light");
    check(b.normal, "normal");
    check(b.scale, "scale");
    check(b.fg_sky, "fg_sky");
    check(b.sky_depth, "sky_depth");
    check(b.total, "total");
}

}  // namespace detail

// One optimization step on a single view: forward, backward, moment update
// with per-group rates, then constraint re-projection.
inline LossBreakdown train_step(TrainerState& st, const DatasetView& view, size_t embed_idx) {
    if (embed_idx >= st.embeddings.size())
        throw std::invalid_argument("train: embedding index out of range");
    StepGradients g;
    const LossBreakdown breakdown = compute_gradients(st, view, embed_idx, st.iteration, g);
    detail::check_finite_breakdown(breakdown, st.iteration);

    st.opt.step += 1;
    const detail::AdamScalar adam(st.config, st.opt.step);
    const TrainConfig& cfg = st.config;
    const double lr_pos = position_learning_rate(cfg, st.iteration);

    const size_t nf = st.scene.foreground.size();
    for (size_t i = 0; i < nf; ++i) {
        ForegroundGaussian& fg = st.scene.foreground[i];
        for (int k = 0; k < 3; ++k) {
            adam(fg.position[k], g.fg_position[i][k], st.opt.fg_position.m[3 * i + k],
                 st.opt.fg_position.v[3 * i + k], lr_pos);
            adam(fg.log_scales[k], g.fg_log_scales[i][k], st.opt.fg_log_scales.m[3 * i + k],
                 st.opt.fg_log_scales.v[3 * i + k], cfg.lr_scale);
            adam(fg.material.albedo[k], g.fg_albedo[i][k], st.opt.fg_albedo.m[3 * i + k],
                 st.opt.fg_albedo.v[3 * i + k], cfg.lr_albedo);
        }
        for (int k = 0; k < 4; ++k)
            adam(fg.rotation[k], g.fg_rotation[i][k], st.opt.fg_rotation.m[4 * i + k],
                 st.opt.fg_rotation.v[4 * i + k], cfg.lr_rotation);
        adam(fg.opacity_logit, g.fg_opacity[i], st.opt.fg_opacity.m[i], st.opt.fg_opacity.v[i],
             cfg.lr_opacity);
        adam(fg.material.roughness, g.fg_roughness[i], st.opt.fg_roughness.m[i],
             st.opt.fg_roughness.v[i], cfg.lr_roughness);
    }
    const size_t ns = st.scene.sky.size();
    for (size_t i = 0; i < ns; ++i) {
        SkyGaussian& sky = st.scene.sky[i];
        adam(sky.theta, g.sky_theta[i], st.opt.sky_angles.m[2 * i], st.opt.sky_angles.v[2 * i],
             lr_pos);
        adam(sky.phi, g.sky_phi[i], st.opt.sky_angles.m[2 * i + 1],
             st.opt.sky_angles.v[2 * i + 1], lr_pos);
        for (int k = 0; k < 4; ++k)
            adam(sky.rotation[k], g.sky_rotation[i][k], st.opt.sky_rotation.m[4 * i + k],
                 st.opt.sky_rotation.v[4 * i + k], cfg.lr_rotation);
        for (int k = 0; k < 3; ++k)
            adam(sky.log_scales[k], g.sky_log_scales[i][k], st.opt.sky_log_scales.m[3 * i + k],
                 st.opt.sky_log_scales.v[3 * i + k], cfg.lr_scale);
        adam(sky.opacity_logit, g.sky_opacity[i], st.opt.sky_opacity.m[i], st.opt.sky_opacity.v[i],
             cfg.lr_opacity);
    }
    adam(st.scene.dome.radius, g.dome_radius, st.opt.dome_radius.m[0], st.opt.dome_radius.v[0],
         cfg.lr_dome_radius);

    {
        size_t off = 0;
        auto update_layer = [&](DenseLayer& layer, DenseLayer& grad) {
            for (size_t k = 0; k < layer.w.size(); ++k, ++off)
                adam(layer.w[k], grad.w[k], st.opt.mlp.m[off], st.opt.mlp.v[off], cfg.lr_mlp);
            for (size_t k = 0; k < layer.b.size(); ++k, ++off)
                adam(layer.b[k], grad.b[k], st.opt.mlp.m[off], st.opt.mlp.v[off], cfg.lr_mlp);
        };
        update_layer(st.mlp.trunk1, g.mlp.trunk1);
        update_layer(st.mlp.trunk2, g.mlp.trunk2);
        update_layer(st.mlp.trunk3, g.mlp.trunk3);
        update_layer(st.mlp.sky_head, g.mlp.sky_head);
        update_layer(st.mlp.light_dense, g.mlp.light_dense);
        update_layer(st.mlp.light_head, g.mlp.light_head);
    }

    {
        // Only the active image's embedding row carries gradient; its moments
        // alone advance (sparse update).
        std::vector<double>& row = st.embeddings.row(embed_idx);
        const size_t base = embed_idx * size_t(kEmbeddingDim);
        for (int k = 0; k < kEmbeddingDim; ++k)
            adam(row[k], g.embedding[k], st.opt.embeddings.m[base + k],
                 st.opt.embeddings.v[base + k], cfg.lr_embedding);
    }

    clamp_constraints(st.scene);

    // Density-control statistics.
    for (size_t i = 0; i < g.screen_grad_norm.size(); ++i) {
        if (g.visible[i]) {
            st.grad_accum[i] += g.screen_grad_norm[i];
            st.grad_count[i] += 1.0;
        }
    }

    st.iteration += 1;
    return breakdown;
}

// ---------------------------------------------------------------------------
// Adaptive density control
// ---------------------------------------------------------------------------

struct DensifyStats {
    int cloned = 0, split = 0, sky_split = 0, pruned = 0;
};

// Applies one densify/prune event at threshold `tau` and resets the gradient
// accumulators. Gaussians with mean screen-space positional gradient above tau
// are cloned (small) or split (large, scale factor 1.6); sky Gaussians split
// along the dome. Gaussians with activated opacity below the prune threshold
// are removed. New Gaussians start with zero optimizer moments.
inline DensifyStats densify_and_prune(TrainerState& st, double tau) {
    DensifyStats stats;
    const TrainConfig& cfg = st.config;
    const size_t nf = st.scene.foreground.size();
    const size_t ns = st.scene.sky.size();
    Rng rng(mix_seed(cfg.seed, 0x64656e73u, uint64_t(st.iteration)));

    long budget = long(cfg.max_gaussians) - long(nf + ns);

    std::vector<ForegroundGaussian> new_fg;
    AdamMoments fpos, frot, fsc, fop, fal, fro;
    auto push_fg_moments = [&](size_t src) {
        auto copy = [&](AdamMoments& dst, const AdamMoments& from, int dim) {
            for (int k = 0; k < dim; ++k) {
                if (src == size_t(-1)) {
                    dst.m.push_back(0.0);
                    dst.v.push_back(0.0);
                } else {
                    dst.m.push_back(from.m[src * dim + k]);
                    dst.v.push_back(from.v[src * dim + k]);
                }
            }
        };
        copy(fpos, st.opt.fg_position, 3);
        copy(frot, st.opt.fg_rotation, 4);
        copy(fsc, st.opt.fg_log_scales, 3);
        copy(fop, st.opt.fg_opacity, 1);
        copy(fal, st.opt.fg_albedo, 3);
        copy(fro, st.opt.fg_roughness, 1);
    };

    for (size_t i = 0; i < nf; ++i) {
        const ForegroundGaussian& g = st.scene.foreground[i];
        if (sigmoid(g.opacity_logit) < cfg.prune_opacity) {
            ++stats.pruned;
            continue;
        }
        const double mean_grad =
            st.grad_count[i] > 0.0 ? st.grad_accum[i] / st.grad_count[i] : 0.0;
        if (mean_grad > tau && budget >= 1) {
            const double max_scale = std::exp(g.log_scales.max_coeff());
            if (max_scale < cfg.clone_scale_fraction * st.scene.dome.radius) {
                // clone: keep the original, duplicate it with fresh moments
                new_fg.push_back(g);
                push_fg_moments(i);
                new_fg.push_back(g);
                push_fg_moments(size_t(-1));
                ++stats.cloned;
            } else {
                auto [c1, c2] = split_foreground_gaussian(g, rng);
                new_fg.push_back(c1);
                push_fg_moments(size_t(-1));
                new_fg.push_back(c2);
                push_fg_moments(size_t(-1));
                ++stats.split;
            }
            budget -= 1;
        } else {
            new_fg.push_back(g);
            push_fg_moments(i);
        }
    }

    std::vector<SkyGaussian> new_sky;
    AdamMoments sang, srot, ssc, sop;
    auto push_sky_moments = [&](size_t src) {
        auto copy = [&](AdamMoments& dst, const AdamMoments& from, int dim) {
            for (int k = 0; k < dim; ++k) {
                if (src == size_t(-1)) {
                    dst.m.push_back(0.0);
                    dst.v.push_back(0.0);
                } else {
                    dst.m.push_back(from.m[src * dim + k]);
                    dst.v.push_back(from.v[src * dim + k]);
                }
            }
        };
        copy(sang, st.opt.sky_angles, 2);
        copy(srot, st.opt.sky_rotation, 4);
        copy(ssc, st.opt.sky_log_scales, 3);
        copy(sop, st.opt.sky_opacity, 1);
    };

    for (size_t k = 0; k < ns; ++k) {
        const SkyGaussian& g = st.scene.sky[k];
        if (sigmoid(g.opacity_logit) < cfg.prune_opacity) {
            ++stats.pruned;
            continue;
        }
        const size_t i = nf + k;
        const double mean_grad =
            st.grad_count[i] > 0.0 ? st.grad_accum[i] / st.grad_count[i] : 0.0;
        if (mean_grad > tau && budget >= 1) {
            auto [c1, c2] = split_sky_gaussian(g, st.scene.dome, rng);
            new_sky.push_back(c1);
            push_sky_moments(size_t(-1));
            new_sky.push_back(c2);
            push_sky_moments(size_t(-1));
            ++stats.sky_split;
            budget -= 1;
        } else {
            new_sky.push_back(g);
            push_sky_moments(k);
        }
    }

    st.scene.foreground = std::move(new_fg);
    st.scene.sky = std::move(new_sky);
    st.opt.fg_position = std::move(fpos);
    st.opt.fg_rotation = std::move(frot);
    st.opt.fg_log_scales = std::move(fsc);
    st.opt.fg_opacity = std::move(fop);
    st.opt.fg_albedo = std::move(fal);
    st.opt.fg_roughness = std::move(fro);
    st.opt.sky_angles = std::move(sang);
    st.opt.sky_rotation = std::move(srot);
    st.opt.sky_log_scales = std::move(ssc);
    st.opt.sky_opacity = std::move(sop);
    st.grad_accum.assign(st.scene.foreground.size() + st.scene.sky.size(), 0.0);
    st.grad_count.assign(st.grad_accum.size(), 0.0);
    return stats;
}

// ---------------------------------------------------------------------------
// Checkpointing: scene PLY + meta sidecar + tensor container per prefix.
// ---------------------------------------------------------------------------

inline void save_trainer_checkpoint(const TrainerState& st, const std::string& prefix) {
    save_scene_ply(st.scene, prefix + ".ply");

    SceneMeta meta;
    meta.dome = st.scene.dome;
    meta.iteration = st.iteration;
    for (size_t i = 0; i < st.image_ids.size(); ++i) {
        ImageLightRecord rec;
        rec.id = st.image_ids[i];
        const AppearanceOutput out = appearance_forward(st.mlp, st.embeddings.row(i));
        rec.light = out.light;
        rec.sky = out.sky;
        meta.images.push_back(std::move(rec));
    }
    save_scene_meta(meta, prefix + ".meta");

    std::vector<NamedTensor> tensors;
    auto push = [&](const std::string& name, std::vector<uint64_t> dims,
                    const std::vector<double>& data) {
        tensors.push_back(NamedTensor{name, std::move(dims), data});
    };
    detail::for_each_layer(st.mlp, [&](const DenseLayer& l, const char* name) {
        push(std::string("mlp.") + name + ".w", {uint64_t(l.out_dim), uint64_t(l.in_dim)}, l.w);
        push(std::string("mlp.") + name + ".b", {uint64_t(l.out_dim)}, l.b);
    });
    {
        std::vector<double> flat;
        flat.reserve(st.embeddings.size() * size_t(kEmbeddingDim));
        for (const auto& row : st.embeddings.rows) flat.insert(flat.end(), row.begin(), row.end());
        push("embeddings", {uint64_t(st.embeddings.size()), uint64_t(kEmbeddingDim)}, flat);
    }
    push("adam.step", {1}, {double(st.opt.step)});
    auto push_moments = [&](const std::string& name, const AdamMoments& mo) {
        push("adam." + name + ".m", {uint64_t(mo.m.size())}, mo.m);
        push("adam." + name + ".v", {uint64_t(mo.v.size())}, mo.v);
    };
    push_moments("fg_position", st.opt.fg_position);
    push_moments("fg_rotation", st.opt.fg_rotation);
    push_moments("fg_log_scales", st.opt.fg_log_scales);
    push_moments("fg_opacity", st.opt.fg_opacity);
    push_moments("fg_albedo", st.opt.fg_albedo);
    push_moments("fg_roughness", st.opt.fg_roughness);
    push_moments("sky_angles", st.opt.sky_angles);
    push_moments("sky_rotation", st.opt.sky_rotation);
    push_moments("sky_log_scales", st.opt.sky_log_scales);
    push_moments("sky_opacity", st.opt.sky_opacity);
    push_moments("dome_radius", st.opt.dome_radius);
    push_moments("mlp", st.opt.mlp);
    push_moments("embeddings", st.opt.embeddings);
    push("densify.accum", {uint64_t(st.grad_accum.size())}, st.grad_accum);
    push("densify.count", {uint64_t(st.grad_count.size())}, st.grad_count);
    save_tensors(tensors, prefix + ".tensors");
}

inline TrainerState load_trainer_checkpoint(const TrainConfig& cfg, const std::string& prefix) {
    TrainerState st;
    st.config = cfg;
    const SceneMeta meta = load_scene_meta(prefix + ".meta");
    st.scene = load_scene_ply(prefix + ".ply", meta.dome);
    st.iteration = meta.iteration;
    for (const ImageLightRecord& rec : meta.images) st.image_ids.push_back(rec.id);

    const std::vector<NamedTensor> tensors = load_tensors(prefix + ".tensors");
    st.mlp = AppearanceMlp{};
    detail::for_each_layer(st.mlp, [&](DenseLayer& l, const char* name) {
        const NamedTensor& w = find_tensor(tensors, std::string("mlp.") + name + ".w");
        const NamedTensor& b = find_tensor(tensors, std::string("mlp.") + name + ".b");
        if (w.dims.size() != 2 || b.dims.size() != 1 || w.dims[0] != b.dims[0])
            throw std::runtime_error("checkpoint: inconsistent layer tensors for " +
                                     std::string(name));
        l.resize(int(w.dims[1]), int(w.dims[0]));
        l.w = w.data;
        l.b = b.data;
    });
    st.mlp.check_shapes();
    {
        const NamedTensor& e = find_tensor(tensors, "embeddings");
        if (e.dims.size() != 2 || e.dims[1] != uint64_t(kEmbeddingDim) ||
            e.dims[0] != st.image_ids.size())
            throw std::runtime_error("checkpoint: embedding table shape mismatch");
        st.embeddings.rows.assign(e.dims[0], std::vector<double>(kEmbeddingDim));
        for (size_t i = 0; i < e.dims[0]; ++i)
            std::copy(e.data.begin() + long(i) * kEmbeddingDim,
                      e.data.begin() + long(i + 1) * kEmbeddingDim,
                      st.embeddings.rows[i].begin());
    }
    st.opt.step = int64_t(find_tensor(tensors, "adam.step").data.at(0));
    auto load_moments = [&](const std::string& name, AdamMoments& mo, size_t expect) {
        mo.m = find_tensor(tensors, "adam." + name + ".m").data;
        mo.v = find_tensor(tensors, "adam." + name + ".v").data;
        if (mo.m.size() != expect || mo.v.size() != expect)
            throw std::runtime_error("checkpoint: moment shape mismatch for " + name);
    };
    const size_t nf = st.scene.foreground.size();
    const size_t ns = st.scene.sky.size();
    load_moments("fg_position", st.opt.fg_position, 3 * nf);
    load_moments("fg_rotation", st.opt.fg_rotation, 4 * nf);
    load_moments("fg_log_scales", st.opt.fg_log_scales, 3 * nf);
    load_moments("fg_opacity", st.opt.fg_opacity, nf);
    load_moments("fg_albedo", st.opt.fg_albedo, 3 * nf);
    load_moments("fg_roughness", st.opt.fg_roughness, nf);
    load_moments("sky_angles", st.opt.sky_angles, 2 * ns);
    load_moments("sky_rotation", st.opt.sky_rotation, 4 * ns);
    load_moments("sky_log_scales", st.opt.sky_log_scales, 3 * ns);
    load_moments("sky_opacity", st.opt.sky_opacity, ns);
    load_moments("dome_radius", st.opt.dome_radius, 1);
    load_moments("mlp", st.opt.mlp, detail::mlp_param_count(st.mlp));
    load_moments("embeddings", st.opt.embeddings, st.image_ids.size() * size_t(kEmbeddingDim));
    st.grad_accum = find_tensor(tensors, "densify.accum").data;
    st.grad_count = find_tensor(tensors, "densify.count").data;
    if (st.grad_accum.size() != nf + ns || st.grad_count.size() != nf + ns)
        throw std::runtime_error("checkpoint: densify accumulator shape mismatch");
    st.lut = default_brdf_lut();
    return st;
}

// ---------------------------------------------------------------------------
// End-to-end driver
// ---------------------------------------------------------------------------

namespace detail {

inline std::string checkpoint_prefix(const std::string& out_dir, int iteration) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%06d", iteration);
    return (std::filesystem::path(out_dir) / buf).string();
}

}  // namespace detail

// Runs the remaining schedule of `st.config` over the dataset in fixed view
// order (iteration modulo view count), logging one CSV row per step and
// writing periodic plus final checkpoints under `out_dir`. Returns the final
// loss breakdown (zeros when no step ran).
inline LossBreakdown fit(TrainerState& st, const Dataset& ds, const std::string& out_dir) {
    if (ds.views.size() != st.image_ids.size())
        throw std::runtime_error("fit: dataset view count does not match the trainer state");
    for (size_t i = 0; i < ds.views.size(); ++i)
        if (ds.views[i].id != st.image_ids[i])
            throw std::runtime_error("fit: dataset view ids do not match the trainer state");
    std::filesystem::create_directories(out_dir);

    const std::string csv_path = (std::filesystem::path(out_dir) / "loss.csv").string();
    std::ofstream csv;
    if (st.iteration == 0) {
        csv.open(csv_path);
        csv << "iteration,total,rec,light,normal,scale,fg_sky,sky_depth\n";
    } else {
        csv.open(csv_path, std::ios::app);
    }
    if (!csv) throw std::runtime_error("fit: cannot write " + csv_path);
    csv.precision(17);

    const TrainConfig& cfg = st.config;
    LossBreakdown last;
    while (st.iteration < cfg.iterations) {
        const size_t view_idx = size_t(st.iteration) % ds.views.size();
        last = train_step(st, ds.views[view_idx], view_idx);
        csv << (st.iteration - 1) << "," << last.total << "," << last.rec << "," << last.light
            << "," << last.normal << "," << last.scale << "," << last.fg_sky << ","
            << last.sky_depth << "\n";

        const int it = st.iteration;
        if (it >= cfg.densify_start && it <= cfg.densify_end &&
            (it - cfg.densify_start) % cfg.densify_interval == 0)
            densify_and_prune(st, densify_threshold(cfg, it));
        if (cfg.opacity_reset_iteration > 0 && it == cfg.opacity_reset_iteration) {
            const double cap = inverse_sigmoid(0.01);
            for (auto& g : st.scene.foreground) g.opacity_logit = std::min(g.opacity_logit, cap);
            for (auto& g : st.scene.sky) g.opacity_logit = std::min(g.opacity_logit, cap);
            st.opt.fg_opacity.resize(st.opt.fg_opacity.size());
            st.opt.sky_opacity.resize(st.opt.sky_opacity.size());
        }
        if (cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0 &&
            it < cfg.iterations)
            save_trainer_checkpoint(st, detail::checkpoint_prefix(out_dir, it));
    }
    csv.flush();
    save_trainer_checkpoint(st,
                            (std::filesystem::path(out_dir) / "final").string());
    return last;
}

}  // namespace splatlight
