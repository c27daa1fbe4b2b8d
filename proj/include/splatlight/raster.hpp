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
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "camera.hpp"
#include "common.hpp"
#include "image.hpp"
#include "scene.hpp"

namespace splatlight {

// A Gaussian is "visible" in a view when its accumulated blend weight over all
// pixels exceeds this threshold.
inline constexpr double kVisibleWeight = 1e-3;

// Which per-Gaussian colors participate in the blended color output. Geometry
// (occlusion, transmittance, depth, alpha, blend weights) always includes
// every Gaussian; the excluded population merely contributes black.
enum class ColorMode { Full, ForegroundOnly, SkyOnly };

struct RasterConfig {
    double alpha_clip = 0.99;       // per-sample opacity ceiling
    double alpha_min = 1.0 / 255.0; // contributions below this are skipped
    double early_stop_T = 1e-4;     // stop blending once transmittance drops below
    double cutoff_sigma = 3.0;      // extent multiplier for culling and tiling
    double dilation = 0.3;          // isotropic screen-space covariance floor (px^2)
    int tile_size = 16;
    unsigned num_threads = 1;
};

// One view-ready splat: world-space geometry plus the color it should blend
// with in this view. Sky Gaussians arrive with their dome position already
// resolved; `is_sky` routes the color into the sky layer.
struct RasterGaussian {
    Vec3 position;
    Vec4 rotation;  // raw (unnormalized) quaternion (w, x, y, z)
    Vec3 log_scales;
    double opacity_logit = 0.0;
    Vec3 color;
    bool is_sky = false;
};

struct ProjectedGaussian {
    bool visible = false;
    Vec2 mean2d;
    Mat2 cov2d;
    double depth = 0.0;
};

namespace detail {

// Per-Gaussian screen-space quantities kept for blending and backward.
struct SplatRecord {
    bool valid = false;
    bool finite = true;
    Vec2 mean2d;
    double conic_a = 0, conic_b = 0, conic_c = 0;  // inverse 2d covariance
    double depth = 0;
    double opacity = 0;
    double radius = 0;
    bool is_sky = false;
    Vec3 color;
};

inline SplatRecord project_record(const RasterGaussian& g, const Camera& cam,
                                  const RasterConfig& cfg) {
    SplatRecord rec;
    rec.is_sky = g.is_sky;
    rec.color = g.color;

    const Vec3 x_cam = cam.to_camera(g.position);
    if (!(x_cam.z >= cam.near)) return rec;  // behind the near plane (or NaN)
    rec.depth = x_cam.z;

    const Mat3 rot = quat_to_rotation(g.rotation.normalized());
    const Vec3 s{std::exp(g.log_scales.x), std::exp(g.log_scales.y), std::exp(g.log_scales.z)};
    // A = R diag(s); Sigma = A A^T; M = W Sigma W^T with W the view rotation.
    Mat3 a;
    for (int i = 0; i < 3; ++i) {
        a.m[i][0] = rot.m[i][0] * s.x;
        a.m[i][1] = rot.m[i][1] * s.y;
        a.m[i][2] = rot.m[i][2] * s.z;
    }
    const Mat3 sigma = a * a.transposed();
    const Mat3 m = cam.rotation * sigma * cam.rotation.transposed();

    const double z = x_cam.z, z2 = z * z;
    const double j00 = cam.fx / z, j02 = -cam.fx * x_cam.x / z2;
    const double j11 = cam.fy / z, j12 = -cam.fy * x_cam.y / z2;

    // cov2d = J M J^T + dilation * I with J = [[j00, 0, j02], [0, j11, j12]].
    const Vec3 jm0{j00 * m.m[0][0] + j02 * m.m[2][0], j00 * m.m[0][1] + j02 * m.m[2][1],
                   j00 * m.m[0][2] + j02 * m.m[2][2]};
    const Vec3 jm1{j11 * m.m[1][0] + j12 * m.m[2][0], j11 * m.m[1][1] + j12 * m.m[2][1],
                   j11 * m.m[1][2] + j12 * m.m[2][2]};
    Mat2 cov;
    cov.m00 = jm0.x * j00 + jm0.z * j02 + cfg.dilation;
    cov.m01 = jm1.x * j00 + jm1.z * j02;
    cov.m10 = cov.m01;
    cov.m11 = jm1.y * j11 + jm1.z * j12 + cfg.dilation;

    const double det = cov.det();
    if (!(det > 0.0)) return rec;
    rec.conic_a = cov.m11 / det;
    rec.conic_b = -cov.m01 / det;
    rec.conic_c = cov.m00 / det;

    rec.mean2d = Vec2{cam.fx * x_cam.x / z + cam.cx, cam.fy * x_cam.y / z + cam.cy};
    rec.radius = cfg.cutoff_sigma * std::sqrt(std::max(0.0, cov.max_eigenvalue()));
    rec.opacity = sigmoid(g.opacity_logit);

    rec.finite = std::isfinite(rec.mean2d.x) && std::isfinite(rec.mean2d.y) &&
                 std::isfinite(rec.conic_a) && std::isfinite(rec.conic_b) &&
                 std::isfinite(rec.conic_c) && std::isfinite(rec.radius);
    if (!rec.finite) return rec;

    // Cull splats whose cutoff-sigma extent cannot touch the viewport.
    if (rec.mean2d.x + rec.radius < 0.0 || rec.mean2d.x - rec.radius > double(cam.width) ||
        rec.mean2d.y + rec.radius < 0.0 || rec.mean2d.y - rec.radius > double(cam.height))
        return rec;

    rec.valid = true;
    return rec;
}

inline void check_gaussian_finite(const RasterGaussian& g, size_t index) {
    const bool ok = g.position.all_finite() && g.log_scales.all_finite() &&
                    g.color.all_finite() && std::isfinite(g.opacity_logit) &&
                    std::isfinite(g.rotation.w) && std::isfinite(g.rotation.x) &&
                    std::isfinite(g.rotation.y) && std::isfinite(g.rotation.z);
    if (!ok)
        throw std::runtime_error("render: non-finite parameters in gaussian " +
                                 std::to_string(index));
    if (!(g.rotation.norm() > 1e-12))
        throw std::runtime_error("render: degenerate rotation in gaussian " +
                                 std::to_string(index));
}

}  // namespace detail

// Culling-aware projection of a single Gaussian. `visible == false` means the
// splat was culled (behind the near plane, degenerate, or off-viewport) and
// contributes nothing — and receives exactly zero gradient.
inline ProjectedGaussian project_gaussian(const RasterGaussian& g, const Camera& cam,
                                          const RasterConfig& cfg = {}) {
    cam.check();
    const detail::SplatRecord rec = detail::project_record(g, cam, cfg);
    ProjectedGaussian out;
    out.visible = rec.valid;
    if (!rec.valid) return out;
    out.mean2d = rec.mean2d;
    out.depth = rec.depth;
    const double det = 1.0 / (rec.conic_a * rec.conic_c - rec.conic_b * rec.conic_b);
    out.cov2d = Mat2{rec.conic_c * det, -rec.conic_b * det, -rec.conic_b * det,
                     rec.conic_a * det};
    return out;
}

struct RenderOutput {
    int width = 0, height = 0;
    ImageRGB color;      // blended colors for the requested mode
    ImageRGB color_fg;   // foreground layer (always populated)
    ImageRGB color_sky;  // sky layer (always populated)
    ImageGray depth;     // alpha-weighted mean splat depth; 0 where uncovered
    ImageGray alpha;     // accumulated alpha = 1 - final transmittance
    std::vector<double> weight_sum;  // per-Gaussian total blend weight
    std::vector<int> peak_pixel;     // pixel index of each Gaussian's largest
                                     // blend weight, -1 if it never contributed
};

// Retained forward state required by render_backward. Pixel-level blending is
// reconstructed by re-walking each tile's depth-ordered candidates, so only
// per-pixel terminal values are stored.
struct RasterState {
    bool retained = false;
    int width = 0, height = 0;
    int tiles_x = 0, tiles_y = 0;
    int tile_size = 16;
    std::vector<detail::SplatRecord> records;
    std::vector<std::vector<int>> tile_lists;  // Gaussian ids, ascending depth
    std::vector<double> final_T;
    std::vector<int> last_candidate;  // position in the tile list, -1 if none
    std::vector<double> weight_total;
    std::vector<double> depth_map;
};

inline RenderOutput render(const std::vector<RasterGaussian>& gaussians, const Camera& cam,
                           ColorMode mode = ColorMode::Full, const RasterConfig& cfg = {},
                           RasterState* state = nullptr) {
    cam.check();
    const size_t n = gaussians.size();
    for (size_t i = 0; i < n; ++i) detail::check_gaussian_finite(gaussians[i], i);

    std::vector<detail::SplatRecord> records(n);
    parallel_for(n, cfg.num_threads,
                 [&](size_t i) { records[i] = detail::project_record(gaussians[i], cam, cfg); });
    for (size_t i = 0; i < n; ++i)
        if (!records[i].finite)
            throw std::runtime_error("render: non-finite projection for gaussian " +
                                     std::to_string(i));

    // Global ascending depth order; stable to make ties deterministic.
    std::vector<int> order;
    order.reserve(n);
    for (size_t i = 0; i < n; ++i)
        if (records[i].valid) order.push_back(int(i));
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return records[a].depth < records[b].depth; });

    const int ts = std::max(1, cfg.tile_size);
    const int tiles_x = (cam.width + ts - 1) / ts;
    const int tiles_y = (cam.height + ts - 1) / ts;
    const size_t tile_count = size_t(tiles_x) * tiles_y;
    std::vector<std::vector<int>> tile_lists(tile_count);
    for (int gid : order) {
        const detail::SplatRecord& rec = records[gid];
        const int tx0 = std::max(0, int(std::floor((rec.mean2d.x - rec.radius) / ts)));
        const int tx1 = std::min(tiles_x - 1, int(std::floor((rec.mean2d.x + rec.radius) / ts)));
        const int ty0 = std::max(0, int(std::floor((rec.mean2d.y - rec.radius) / ts)));
        const int ty1 = std::min(tiles_y - 1, int(std::floor((rec.mean2d.y + rec.radius) / ts)));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                tile_lists[size_t(ty) * tiles_x + tx].push_back(gid);
    }

    RenderOutput out;
    out.width = cam.width;
    out.height = cam.height;
    out.color = ImageRGB(cam.width, cam.height);
    out.color_fg = ImageRGB(cam.width, cam.height);
    out.color_sky = ImageRGB(cam.width, cam.height);
    out.depth = ImageGray(cam.width, cam.height);
    out.alpha = ImageGray(cam.width, cam.height);
    out.weight_sum.assign(n, 0.0);

    const size_t pixel_count = size_t(cam.width) * cam.height;
    std::vector<double> final_T(pixel_count, 1.0);
    std::vector<int> last_candidate(pixel_count, -1);
    std::vector<double> weight_total(pixel_count, 0.0);
    std::vector<std::vector<double>> tile_weights(tile_count);
    std::vector<std::vector<std::pair<double, int>>> tile_peaks(tile_count);

    parallel_for(tile_count, cfg.num_threads, [&](size_t t) {
        const std::vector<int>& list = tile_lists[t];
        std::vector<double>& wlocal = tile_weights[t];
        wlocal.assign(list.size(), 0.0);
        std::vector<std::pair<double, int>>& plocal = tile_peaks[t];
        plocal.assign(list.size(), {0.0, -1});
        const int tx = int(t) % tiles_x, ty = int(t) / tiles_x;
        const int x0 = tx * ts, x1 = std::min(cam.width, x0 + ts);
        const int y0 = ty * ts, y1 = std::min(cam.height, y0 + ts);
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                const double cxp = px + 0.5, cyp = py + 0.5;
                double trans = 1.0;
                Vec3 acc_fg{0, 0, 0}, acc_sky{0, 0, 0};
                double depth_acc = 0.0, w_acc = 0.0;
                int last = -1;
                for (size_t k = 0; k < list.size(); ++k) {
                    const detail::SplatRecord& rec = records[list[k]];
                    const double dx = cxp - rec.mean2d.x, dy = cyp - rec.mean2d.y;
                    const double power = -0.5 * (rec.conic_a * dx * dx + rec.conic_c * dy * dy) -
                                         rec.conic_b * dx * dy;
                    if (power > 0.0) continue;
                    const double alpha = std::min(cfg.alpha_clip, rec.opacity * std::exp(power));
                    if (alpha < cfg.alpha_min) continue;
                    const double w = alpha * trans;
                    if (rec.is_sky)
                        acc_sky += rec.color * w;
                    else
                        acc_fg += rec.color * w;
                    depth_acc += rec.depth * w;
                    w_acc += w;
                    wlocal[k] += w;
                    if (w > plocal[k].first)
                        plocal[k] = {w, int(size_t(py) * cam.width + px)};
                    trans *= 1.0 - alpha;
                    last = int(k);
                    if (trans < cfg.early_stop_T) break;
                }
                const size_t pix = size_t(py) * cam.width + px;
                final_T[pix] = trans;
                last_candidate[pix] = last;
                weight_total[pix] = w_acc;
                out.color_fg.px[pix] = acc_fg;
                out.color_sky.px[pix] = acc_sky;
                out.depth.px[pix] = w_acc > 0.0 ? depth_acc / w_acc : 0.0;
                out.alpha.px[pix] = 1.0 - trans;
                switch (mode) {
                    case ColorMode::Full: out.color.px[pix] = acc_fg + acc_sky; break;
                    case ColorMode::ForegroundOnly: out.color.px[pix] = acc_fg; break;
                    case ColorMode::SkyOnly: out.color.px[pix] = acc_sky; break;
                }
            }
        }
    });

    // Deterministic merge of per-tile weight contributions, in tile order.
    out.peak_pixel.assign(n, -1);
    std::vector<double> peak_weight(n, 0.0);
    for (size_t t = 0; t < tile_count; ++t)
        for (size_t k = 0; k < tile_lists[t].size(); ++k) {
            const int gid = tile_lists[t][k];
            out.weight_sum[gid] += tile_weights[t][k];
            if (tile_peaks[t][k].first > peak_weight[gid]) {
                peak_weight[gid] = tile_peaks[t][k].first;
                out.peak_pixel[gid] = tile_peaks[t][k].second;
            }
        }

    if (state) {
        state->retained = true;
        state->width = cam.width;
        state->height = cam.height;
        state->tiles_x = tiles_x;
        state->tiles_y = tiles_y;
        state->tile_size = ts;
        state->records = std::move(records);
        state->tile_lists = std::move(tile_lists);
        state->final_T = std::move(final_T);
        state->last_candidate = std::move(last_candidate);
        state->weight_total = std::move(weight_total);
        state->depth_map = out.depth.px;
    }
    return out;
}

// Upstream (adjoint) signals for render_backward. Empty images/vectors are
// treated as zero. Color gradients are given per layer; a gradient w.r.t. the
// Full-mode color feeds both layers with the same image.
struct RenderUpstream {
    ImageRGB d_color_fg;
    ImageRGB d_color_sky;
    ImageGray d_depth;
    ImageGray d_alpha;
    std::vector<double> d_weight_sum;
};

struct RasterGrads {
    std::vector<Vec3> d_position;
    std::vector<Vec4> d_rotation;
    std::vector<Vec3> d_log_scales;
    std::vector<double> d_opacity_logit;
    std::vector<Vec3> d_color;
    // Screen-space gradient of each Gaussian's projected mean; its magnitude
    // drives adaptive densification.
    std::vector<Vec2> d_mean2d;
};

namespace detail {

// Screen-space adjoint accumulator for one Gaussian.
struct ScreenGrad {
    Vec2 mean2d;
    double conic_a = 0, conic_b = 0, conic_c = 0;
    double opacity = 0;  // w.r.t. activated opacity
    Vec3 color{0, 0, 0};
    double depth = 0;  // w.r.t. camera-space z
};

}  // namespace detail

inline RasterGrads render_backward(const std::vector<RasterGaussian>& gaussians,
                                   const Camera& cam, const RenderUpstream& up,
                                   const RasterState& state, const RasterConfig& cfg = {}) {
    if (!state.retained)
        throw std::runtime_error("render_backward: no retained forward state");
    const size_t n = gaussians.size();
    if (state.records.size() != n)
        throw std::runtime_error("render_backward: state does not match the gaussian set");
    if (state.width != cam.width || state.height != cam.height)
        throw std::runtime_error("render_backward: state does not match the camera");
    const size_t pixel_count = size_t(cam.width) * cam.height;
    auto check_img = [&](int w, int h, const char* name) {
        if (w != 0 && (w != cam.width || h != cam.height))
            throw std::invalid_argument(std::string("render_backward: upstream size mismatch: ") +
                                        name);
    };
    check_img(up.d_color_fg.width, up.d_color_fg.height, "d_color_fg");
    check_img(up.d_color_sky.width, up.d_color_sky.height, "d_color_sky");
    check_img(up.d_depth.width, up.d_depth.height, "d_depth");
    check_img(up.d_alpha.width, up.d_alpha.height, "d_alpha");
    if (!up.d_weight_sum.empty() && up.d_weight_sum.size() != n)
        throw std::invalid_argument("render_backward: upstream size mismatch: d_weight_sum");

    const bool has_fg = up.d_color_fg.width != 0;
    const bool has_sky = up.d_color_sky.width != 0;
    const bool has_depth = up.d_depth.width != 0;
    const bool has_alpha = up.d_alpha.width != 0;
    const bool has_ws = !up.d_weight_sum.empty();
    const Vec3 zero3{0, 0, 0};

    const size_t tile_count = state.tile_lists.size();
    std::vector<std::vector<detail::ScreenGrad>> tile_grads(tile_count);
    const int ts = state.tile_size;

    parallel_for(tile_count, cfg.num_threads, [&](size_t t) {
        const std::vector<int>& list = state.tile_lists[t];
        std::vector<detail::ScreenGrad>& glocal = tile_grads[t];
        glocal.assign(list.size(), detail::ScreenGrad{});
        const int tx = int(t) % state.tiles_x, ty = int(t) / state.tiles_x;
        const int x0 = tx * ts, x1 = std::min(cam.width, x0 + ts);
        const int y0 = ty * ts, y1 = std::min(cam.height, y0 + ts);
        for (int py = y0; py < y1; ++py) {
            for (int px = x0; px < x1; ++px) {
                const size_t pix = size_t(py) * cam.width + px;
                const int last = state.last_candidate[pix];
                if (last < 0) continue;
                const double cxp = px + 0.5, cyp = py + 0.5;
                const double t_final = state.final_T[pix];
                const double w_total = state.weight_total[pix];
                const double d_out = state.depth_map[pix];
                const Vec3 g_fg = has_fg ? up.d_color_fg.px[pix] : zero3;
                const Vec3 g_sky = has_sky ? up.d_color_sky.px[pix] : zero3;
                const double g_d = has_depth ? up.d_depth.px[pix] : 0.0;
                const double g_a = has_alpha ? up.d_alpha.px[pix] : 0.0;

                double suffix = 0.0;       // sum of phi_j * w_j over later splats
                double t_next = t_final;   // transmittance after the current splat
                for (int k = last; k >= 0; --k) {
                    const int gid = list[k];
                    const detail::SplatRecord& rec = state.records[gid];
                    const double dx = cxp - rec.mean2d.x, dy = cyp - rec.mean2d.y;
                    const double power =
                        -0.5 * (rec.conic_a * dx * dx + rec.conic_c * dy * dy) -
                        rec.conic_b * dx * dy;
                    if (power > 0.0) continue;
                    const double raw_alpha = rec.opacity * std::exp(power);
                    const double alpha = std::min(cfg.alpha_clip, raw_alpha);
                    if (alpha < cfg.alpha_min) continue;
                    const double t_i = t_next / (1.0 - alpha);
                    const double w_i = alpha * t_i;
                    const Vec3& g_c = rec.is_sky ? g_sky : g_fg;

                    double phi = g_c.dot(rec.color);
                    if (g_d != 0.0 && w_total > 0.0) phi += g_d * (rec.depth - d_out) / w_total;
                    if (has_ws) phi += up.d_weight_sum[gid];

                    detail::ScreenGrad& sg = glocal[k];
                    sg.color += g_c * w_i;
                    if (g_d != 0.0 && w_total > 0.0) sg.depth += g_d * w_i / w_total;

                    if (raw_alpha < cfg.alpha_clip) {  // on the clip plateau d_alpha = 0
                        const double d_alpha =
                            phi * t_i + (g_a * t_final - suffix) / (1.0 - alpha);
                        sg.opacity += d_alpha * std::exp(power);
                        const double d_power = d_alpha * alpha;
                        sg.conic_a += -0.5 * dx * dx * d_power;
                        sg.conic_b += -dx * dy * d_power;
                        sg.conic_c += -0.5 * dy * dy * d_power;
                        sg.mean2d += Vec2{rec.conic_a * dx + rec.conic_b * dy,
                                          rec.conic_b * dx + rec.conic_c * dy} *
                                     d_power;
                    }
                    suffix += phi * w_i;
                    t_next = t_i;
                }
            }
        }
    });

    // Deterministic merge in tile order.
    std::vector<detail::ScreenGrad> screen(n);
    for (size_t t = 0; t < tile_count; ++t) {
        const std::vector<int>& list = state.tile_lists[t];
        for (size_t k = 0; k < list.size(); ++k) {
            const detail::ScreenGrad& src = tile_grads[t][k];
            detail::ScreenGrad& dst = screen[list[k]];
            dst.mean2d += src.mean2d;
            dst.conic_a += src.conic_a;
            dst.conic_b += src.conic_b;
            dst.conic_c += src.conic_c;
            dst.opacity += src.opacity;
            dst.color += src.color;
            dst.depth += src.depth;
        }
    }

    RasterGrads grads;
    grads.d_position.assign(n, Vec3{0, 0, 0});
    grads.d_rotation.assign(n, Vec4{0, 0, 0, 0});
    grads.d_log_scales.assign(n, Vec3{0, 0, 0});
    grads.d_opacity_logit.assign(n, 0.0);
    grads.d_color.assign(n, Vec3{0, 0, 0});
    grads.d_mean2d.assign(n, Vec2{0, 0});
    for (size_t i = 0; i < n; ++i) grads.d_mean2d[i] = screen[i].mean2d;

    // Chain screen-space adjoints back to the 3D parameters. Culled Gaussians
    // keep exactly zero gradients.
    parallel_for(n, cfg.num_threads, [&](size_t i) {
        const detail::SplatRecord& rec = state.records[i];
        if (!rec.valid) return;
        const detail::ScreenGrad& sg = screen[i];
        const RasterGaussian& g = gaussians[i];

        grads.d_color[i] = sg.color;
        grads.d_opacity_logit[i] = sg.opacity * rec.opacity * (1.0 - rec.opacity);

        // Recompute the forward projection intermediates.
        const Vec3 x_cam = cam.to_camera(g.position);
        const double z = x_cam.z, z2 = z * z;
        const Vec4 q = g.rotation.normalized();
        const Mat3 rot = quat_to_rotation(q);
        const Vec3 s{std::exp(g.log_scales.x), std::exp(g.log_scales.y),
                     std::exp(g.log_scales.z)};
        Mat3 a;
        for (int r = 0; r < 3; ++r) {
            a.m[r][0] = rot.m[r][0] * s.x;
            a.m[r][1] = rot.m[r][1] * s.y;
            a.m[r][2] = rot.m[r][2] * s.z;
        }
        const Mat3 sigma = a * a.transposed();
        const Mat3 m = cam.rotation * sigma * cam.rotation.transposed();
        const double j00 = cam.fx / z, j02 = -cam.fx * x_cam.x / z2;
        const double j11 = cam.fy / z, j12 = -cam.fy * x_cam.y / z2;

        // Inverse chain: full symmetric adjoint of cov2d = -Conic G Conic.
        const double ga = sg.conic_a, gb = 0.5 * sg.conic_b, gc = sg.conic_c;
        const double ca = rec.conic_a, cb = rec.conic_b, cc = rec.conic_c;
        // t = Conic * G  (2x2), then dCov = -(t * Conic).
        const double t00 = ca * ga + cb * gb, t01 = ca * gb + cb * gc;
        const double t10 = cb * ga + cc * gb, t11 = cb * gb + cc * gc;
        const double dc00 = -(t00 * ca + t01 * cb);
        const double dc01 = -(t00 * cb + t01 * cc);
        const double dc10 = -(t10 * ca + t11 * cb);
        const double dc11 = -(t10 * cb + t11 * cc);

        // dM = J^T dCov J  (3x3 full adjoint); J rows (j00,0,j02), (0,j11,j12).
        const double jr0[3] = {j00, 0.0, j02};
        const double jr1[3] = {0.0, j11, j12};
        Mat3 dm;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                dm.m[r][c] = jr0[r] * (dc00 * jr0[c] + dc01 * jr1[c]) +
                             jr1[r] * (dc10 * jr0[c] + dc11 * jr1[c]);

        // dJ = 2 dCov J M  (2x3), needed for the position chain through J.
        double jm[2][3];
        for (int c = 0; c < 3; ++c) {
            jm[0][c] = jr0[0] * m.m[0][c] + jr0[2] * m.m[2][c];
            jm[1][c] = jr1[1] * m.m[1][c] + jr1[2] * m.m[2][c];
        }
        double dj[2][3];
        for (int c = 0; c < 3; ++c) {
            dj[0][c] = 2.0 * (dc00 * jm[0][c] + dc01 * jm[1][c]);
            dj[1][c] = 2.0 * (dc10 * jm[0][c] + dc11 * jm[1][c]);
        }

        // dSigma = W^T dM W; then through Sigma = A A^T: dA = 2 dSigma A.
        const Mat3 dsigma = cam.rotation.transposed() * dm * cam.rotation;
        const Mat3 da = (dsigma + dsigma.transposed()) * a;

        Vec4 dq_unit{0, 0, 0, 0};
        const std::array<Mat3, 4> jq = quat_to_rotation_jacobian(q);
        Mat3 dr;
        Vec3 dlog{0, 0, 0};
        for (int r = 0; r < 3; ++r) {
            dr.m[r][0] = da.m[r][0] * s.x;
            dr.m[r][1] = da.m[r][1] * s.y;
            dr.m[r][2] = da.m[r][2] * s.z;
            dlog.x += da.m[r][0] * rot.m[r][0];
            dlog.y += da.m[r][1] * rot.m[r][1];
            dlog.z += da.m[r][2] * rot.m[r][2];
        }
        dlog = dlog.cwise(s);  // ds -> dlog_s
        dq_unit.w = jq[0].ddot(dr);
        dq_unit.x = jq[1].ddot(dr);
        dq_unit.y = jq[2].ddot(dr);
        dq_unit.z = jq[3].ddot(dr);
        grads.d_rotation[i] = normalize_quat_backward(g.rotation, dq_unit);
        grads.d_log_scales[i] = dlog;

        // Camera-space position adjoint: mean2d, J entries, and depth output.
        Vec3 dx_cam{0, 0, 0};
        dx_cam.x += sg.mean2d.x * cam.fx / z;
        dx_cam.y += sg.mean2d.y * cam.fy / z;
        dx_cam.z += -sg.mean2d.x * cam.fx * x_cam.x / z2 - sg.mean2d.y * cam.fy * x_cam.y / z2;
        dx_cam.x += dj[0][2] * (-cam.fx / z2);
        dx_cam.y += dj[1][2] * (-cam.fy / z2);
        dx_cam.z += dj[0][0] * (-cam.fx / z2) + dj[1][1] * (-cam.fy / z2) +
                    dj[0][2] * (2.0 * cam.fx * x_cam.x / (z2 * z)) +
                    dj[1][2] * (2.0 * cam.fy * x_cam.y / (z2 * z));
        dx_cam.z += sg.depth;
        grads.d_position[i] = cam.rotation.transposed() * dx_cam;
    });

    return grads;
}

// Maps a world-position gradient of a sky Gaussian onto its dome parameters
// (polar/azimuth angles and the shared dome radius) through the
// spherical-to-Cartesian Jacobian.
struct SkyParamGrads {
    double d_theta = 0, d_phi = 0, d_radius = 0;
};

inline SkyParamGrads sky_param_grads(const SkyGaussian& g, const SkyDome& dome,
                                     const Vec3& d_position) {
    const SkyPositionJacobian j = sky_position_jacobian(g, dome);
    return {d_position.dot(j.d_theta), d_position.dot(j.d_phi), d_position.dot(j.d_radius)};
}

}  // namespace splatlight
