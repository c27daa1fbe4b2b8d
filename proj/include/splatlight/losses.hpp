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
#include <stdexcept>
#include <vector>

#include "camera.hpp"
#include "common.hpp"
#include "image.hpp"
#include "sh.hpp"

namespace splatlight {

struct LossWeights {
    double lambda_rec_l1 = 0.8;      // L1 share inside the reconstruction loss
    double lambda_light = 1.0;
    double lambda_normal = 0.05;
    double lambda_scale = 1.0;
    double lambda_fg_sky = 0.5;
    double lambda_sky_depth = 0.005;
    double gamma_sky_depth = 0.02;
    int light_samples = 256;
    // Eq-literal mask placement for the separation loss (penalizes foreground
    // on foreground pixels); default follows the stated decoupling goal.
    bool literal_fg_sky_masks = false;
    int warmup_iterations = 500;       // only the separation loss before this
    int geometry_reg_start = 2000;     // normal/scale terms join at this point
};

// ---------------------------------------------------------------------------
// Reconstruction: masked L1 + masked DSSIM with an 11x11 Gaussian window.
// Occluded pixels are zeroed in both images (so their values have no
// influence) and excluded from every average.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr int kSsimRadius = 5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

inline const std::vector<double>& ssim_kernel() {
    static const std::vector<double> k = [] {
        std::vector<double> v(2 * kSsimRadius + 1);
        double sum = 0.0;
        for (int t = -kSsimRadius; t <= kSsimRadius; ++t) {
            v[t + kSsimRadius] = std::exp(-0.5 * t * t / (1.5 * 1.5));
            sum += v[t + kSsimRadius];
        }
        for (double& x : v) x /= sum;
        return v;
    }();
    return k;
}

inline int mirror_index(int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
}

using Plane = std::vector<double>;

inline Plane conv_h(const Plane& in, int w, int h) {
    const std::vector<double>& k = ssim_kernel();
    Plane out(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int o = -kSsimRadius; o <= kSsimRadius; ++o)
                acc += k[o + kSsimRadius] * in[size_t(y) * w + mirror_index(x + o, w)];
            out[size_t(y) * w + x] = acc;
        }
    return out;
}

inline Plane conv_v(const Plane& in, int w, int h) {
    const std::vector<double>& k = ssim_kernel();
    Plane out(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int o = -kSsimRadius; o <= kSsimRadius; ++o)
                acc += k[o + kSsimRadius] * in[size_t(mirror_index(y + o, h)) * w + x];
            out[size_t(y) * w + x] = acc;
        }
    return out;
}

inline Plane conv2(const Plane& in, int w, int h) { return conv_v(conv_h(in, w, h), w, h); }

// Adjoint of conv2 under mirrored boundaries: scatter with the same taps.
inline Plane conv2_adjoint(const Plane& d_out, int w, int h) {
    const std::vector<double>& k = ssim_kernel();
    Plane mid(d_out.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double g = d_out[size_t(y) * w + x];
            if (g == 0.0) continue;
            for (int o = -kSsimRadius; o <= kSsimRadius; ++o)
                mid[size_t(mirror_index(y + o, h)) * w + x] += k[o + kSsimRadius] * g;
        }
    Plane out(d_out.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double g = mid[size_t(y) * w + x];
            if (g == 0.0) continue;
            for (int o = -kSsimRadius; o <= kSsimRadius; ++o)
                out[size_t(y) * w + mirror_index(x + o, w)] += k[o + kSsimRadius] * g;
        }
    return out;
}

}  // namespace detail

struct RecLossResult {
    double loss = 0.0;
    double l1 = 0.0;
    double dssim = 0.0;
    ImageRGB d_render;  // gradient of `loss` w.r.t. the rendered image
};

// `occluder` marks transient pixels (>= 0.5 = excluded); pass an empty image
// for no mask. A fully-occluded image yields exactly zero loss and gradient.
inline RecLossResult loss_rec(const ImageRGB& render, const ImageRGB& gt,
                              const ImageGray& occluder, double lambda_l1 = 0.8) {
    if (render.width != gt.width || render.height != gt.height || render.width <= 0)
        throw std::invalid_argument("loss_rec: image shape mismatch");
    const bool masked = occluder.width != 0;
    if (masked && (occluder.width != render.width || occluder.height != render.height))
        throw std::invalid_argument("loss_rec: occluder mask shape mismatch");
    if (!(lambda_l1 >= 0.0 && lambda_l1 <= 1.0))
        throw std::invalid_argument("loss_rec: lambda must lie in [0, 1]");

    const int w = render.width, h = render.height;
    const size_t np = size_t(w) * h;
    std::vector<char> valid(np, 1);
    size_t n_valid = np;
    if (masked) {
        n_valid = 0;
        for (size_t p = 0; p < np; ++p) {
            valid[p] = occluder.px[p] < 0.5;
            n_valid += valid[p];
        }
    }
    RecLossResult res;
    res.d_render = ImageRGB(w, h);
    if (n_valid == 0) return res;

    const double count = 3.0 * double(n_valid);

    // L1 over valid pixels.
    double l1 = 0.0;
    for (size_t p = 0; p < np; ++p) {
        if (!valid[p]) continue;
        const Vec3 d = render.px[p] - gt.px[p];
        l1 += std::abs(d.x) + std::abs(d.y) + std::abs(d.z);
        const double s = lambda_l1 / count;
        res.d_render.px[p] += Vec3{d.x > 0 ? s : (d.x < 0 ? -s : 0.0),
                                   d.y > 0 ? s : (d.y < 0 ? -s : 0.0),
                                   d.z > 0 ? s : (d.z < 0 ? -s : 0.0)};
    }
    res.l1 = l1 / count;

    // DSSIM with occluded pixels zeroed out of both images.
    using detail::Plane;
    double ssim_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        Plane x(np), y(np);
        for (size_t p = 0; p < np; ++p) {
            x[p] = valid[p] ? render.px[p][c] : 0.0;
            y[p] = valid[p] ? gt.px[p][c] : 0.0;
        }
        Plane x2(np), y2(np), xy(np);
        for (size_t p = 0; p < np; ++p) {
            x2[p] = x[p] * x[p];
            y2[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const Plane ux = detail::conv2(x, w, h);
        const Plane uy = detail::conv2(y, w, h);
        const Plane kx2 = detail::conv2(x2, w, h);
        const Plane ky2 = detail::conv2(y2, w, h);
        const Plane kxy = detail::conv2(xy, w, h);

        Plane d_ux(np, 0.0), d_kx2(np, 0.0), d_kxy(np, 0.0);
        const double d_ssim = -(1.0 - lambda_l1) / (2.0 * count);
        for (size_t p = 0; p < np; ++p) {
            const double sxx = kx2[p] - ux[p] * ux[p];
            const double syy = ky2[p] - uy[p] * uy[p];
            const double sxy = kxy[p] - ux[p] * uy[p];
            const double a1 = 2.0 * ux[p] * uy[p] + detail::kSsimC1;
            const double a2 = 2.0 * sxy + detail::kSsimC2;
            const double b1 = ux[p] * ux[p] + uy[p] * uy[p] + detail::kSsimC1;
            const double b2 = sxx + syy + detail::kSsimC2;
            const double s = (a1 * a2) / (b1 * b2);
            if (valid[p]) {
                ssim_sum += s;
                const double d_a1 = d_ssim * a2 / (b1 * b2);
                const double d_a2 = d_ssim * a1 / (b1 * b2);
                const double d_b1 = -d_ssim * s / b1;
                const double d_b2 = -d_ssim * s / b2;
                const double d_sxx = d_b2;
                const double d_sxy = 2.0 * d_a2;
                d_ux[p] += d_a1 * 2.0 * uy[p] + d_b1 * 2.0 * ux[p] - 2.0 * ux[p] * d_sxx -
                           uy[p] * d_sxy;
                d_kx2[p] += d_sxx;
                d_kxy[p] += d_sxy;
            }
        }
        const Plane g_ux = detail::conv2_adjoint(d_ux, w, h);
        const Plane g_x2 = detail::conv2_adjoint(d_kx2, w, h);
        const Plane g_xy = detail::conv2_adjoint(d_kxy, w, h);
        for (size_t p = 0; p < np; ++p) {
            if (!valid[p]) continue;  // zeroed pixels carry no gradient
            res.d_render.px[p][c] += g_ux[p] + 2.0 * x[p] * g_x2[p] + y[p] * g_xy[p];
        }
    }
    res.dssim = (1.0 - ssim_sum / count) / 2.0;
    res.loss = lambda_l1 * res.l1 + (1.0 - lambda_l1) * res.dssim;
    return res;
}

// ---------------------------------------------------------------------------
// Environment-light positivity: mean squared negative radiance over random
// upper-hemisphere directions.
// ---------------------------------------------------------------------------

struct LightLossResult {
    double loss = 0.0;
    ShCoeffs d_light;
};

inline LightLossResult loss_light(const ShCoeffs& light, int samples, Rng& rng) {
    light.check();
    if (samples < 1) throw std::invalid_argument("loss_light: need at least one sample");
    LightLossResult res;
    res.d_light = ShCoeffs::zeros(light.degree);
    double basis[kMaxShCoeffs];
    for (int k = 0; k < samples; ++k) {
        const double z = rng.uniform();
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        const Vec3 dir{r * std::cos(phi), r * std::sin(phi), z};
        eval_sh_basis(dir, light.degree, basis);
        Vec3 radiance{0, 0, 0};
        for (int j = 0; j < light.count(); ++j) radiance += light.c[j] * basis[j];
        const Vec3 neg{std::min(0.0, radiance.x), std::min(0.0, radiance.y),
                       std::min(0.0, radiance.z)};
        res.loss += neg.dot(neg);
        if (neg.x < 0.0 || neg.y < 0.0 || neg.z < 0.0) {
            const Vec3 g = neg * (2.0 / samples);
            for (int j = 0; j < light.count(); ++j) res.d_light.c[j] += g * basis[j];
        }
    }
    res.loss /= samples;
    return res;
}

// ---------------------------------------------------------------------------
// Normal consistency: per-Gaussian normals pulled toward reference normals
// derived from the rendered depth map.
// ---------------------------------------------------------------------------

struct NormalLossResult {
    double loss = 0.0;
    std::vector<Vec3> d_normals;
    std::vector<double> d_weights;
    ImageGray d_depth;
    int used_count = 0;
};

namespace detail {

// Camera-space back-projection of a pixel center at a given depth.
inline Vec3 backproject(const Camera& cam, int px, int py, double depth) {
    return Vec3{(px + 0.5 - cam.cx) / cam.fx * depth, (py + 0.5 - cam.cy) / cam.fy * depth,
                depth};
}

}  // namespace detail

// `normals` and `weights` are per foreground Gaussian (world space, blend
// weight sums); `peak_pixels` are the raster's dominant-pixel indices. The
// reference normal comes from central differences of back-projected depths;
// Gaussians whose peak pixel touches the border or an uncovered neighbor are
// skipped. `occluder` (optional) skips Gaussians peaking on masked pixels.
inline NormalLossResult loss_normal(const std::vector<Vec3>& normals,
                                    const std::vector<double>& weights,
                                    const std::vector<int>& peak_pixels, const ImageGray& depth,
                                    const Camera& cam, const ImageGray& occluder = {}) {
    if (normals.size() != weights.size() || normals.size() != peak_pixels.size())
        throw std::invalid_argument("loss_normal: per-gaussian arrays disagree");
    if (depth.width != cam.width || depth.height != cam.height)
        throw std::invalid_argument("loss_normal: depth map does not match the camera");
    const bool masked = occluder.width != 0;
    if (masked && (occluder.width != depth.width || occluder.height != depth.height))
        throw std::invalid_argument("loss_normal: occluder mask shape mismatch");

    NormalLossResult res;
    res.d_normals.assign(normals.size(), Vec3{0, 0, 0});
    res.d_weights.assign(normals.size(), 0.0);
    res.d_depth = ImageGray(depth.width, depth.height);

    for (size_t i = 0; i < normals.size(); ++i) {
        const int pix = peak_pixels[i];
        if (pix < 0) continue;
        const int px = pix % cam.width, py = pix / cam.width;
        if (px <= 0 || px >= cam.width - 1 || py <= 0 || py >= cam.height - 1) continue;
        if (masked && occluder.px[pix] >= 0.5) continue;
        const double d_xp = depth.at(px + 1, py), d_xm = depth.at(px - 1, py);
        const double d_yp = depth.at(px, py + 1), d_ym = depth.at(px, py - 1);
        if (d_xp <= 0.0 || d_xm <= 0.0 || d_yp <= 0.0 || d_ym <= 0.0) continue;

        const Vec3 pxp = detail::backproject(cam, px + 1, py, d_xp);
        const Vec3 pxm = detail::backproject(cam, px - 1, py, d_xm);
        const Vec3 pyp = detail::backproject(cam, px, py + 1, d_yp);
        const Vec3 pym = detail::backproject(cam, px, py - 1, d_ym);
        const Vec3 tx = (pxp - pxm) * 0.5;
        const Vec3 ty = (pyp - pym) * 0.5;
        const Vec3 c = tx.cross(ty);
        const double cn = c.norm();
        if (cn < 1e-18) continue;
        Vec3 n_cam = c / cn;
        // Orient toward the camera (camera looks down +z, surface at z > 0).
        const Vec3 center = detail::backproject(cam, px, py, depth.at(px, py));
        double flip = 1.0;
        if (n_cam.dot(center) > 0.0) flip = -1.0;
        n_cam *= flip;
        const Vec3 n_world = cam.rotation.transposed() * n_cam;

        const double align = normals[i].dot(n_world);
        res.loss += weights[i] * (1.0 - align);
        res.d_weights[i] = 1.0 - align;
        res.d_normals[i] = n_world * (-weights[i]);
        ++res.used_count;

        // Backward to the depth map through N(world) <- flip/normalize/cross.
        const Vec3 d_n_world = normals[i] * (-weights[i]);
        const Vec3 d_n_cam = (cam.rotation * d_n_world) * flip;
        const Vec3 d_c = normalize_backward(c, d_n_cam);
        const Vec3 d_tx = ty.cross(d_c);
        const Vec3 d_ty = d_c.cross(tx);
        // P(px,py,d) = ((px+.5-cx)/fx, (py+.5-cy)/fy, 1) * d.
        auto depth_dir = [&](int qx, int qy) {
            return Vec3{(qx + 0.5 - cam.cx) / cam.fx, (qy + 0.5 - cam.cy) / cam.fy, 1.0};
        };
        res.d_depth.at(px + 1, py) += 0.5 * d_tx.dot(depth_dir(px + 1, py));
        res.d_depth.at(px - 1, py) -= 0.5 * d_tx.dot(depth_dir(px - 1, py));
        res.d_depth.at(px, py + 1) += 0.5 * d_ty.dot(depth_dir(px, py + 1));
        res.d_depth.at(px, py - 1) -= 0.5 * d_ty.dot(depth_dir(px, py - 1));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Scale flattening: sum of each foreground Gaussian's smallest linear scale.
// ---------------------------------------------------------------------------

struct ScaleLossResult {
    double loss = 0.0;
    std::vector<Vec3> d_scales;
};

inline ScaleLossResult loss_scale(const std::vector<Vec3>& scales) {
    ScaleLossResult res;
    res.d_scales.assign(scales.size(), Vec3{0, 0, 0});
    for (size_t i = 0; i < scales.size(); ++i) {
        const Vec3& s = scales[i];
        int axis = 0;
        if (s.y < s[axis]) axis = 1;
        if (s.z < s[axis]) axis = 2;
        res.loss += s[axis];
        res.d_scales[i][axis] = 1.0;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Foreground/sky separation: penalize foreground color on sky pixels and sky
// color on foreground pixels (goal-consistent placement; `literal_masks`
// swaps them to the printed form).
// ---------------------------------------------------------------------------

struct FgSkyLossResult {
    double loss = 0.0;
    ImageRGB d_fg;
    ImageRGB d_sky;
};

inline FgSkyLossResult loss_fg_sky(const ImageRGB& fg, const ImageRGB& sky,
                                   const ImageGray& sky_mask, const ImageGray& occluder,
                                   bool literal_masks = false) {
    if (fg.width != sky.width || fg.height != sky.height || fg.width <= 0)
        throw std::invalid_argument("loss_fg_sky: image shape mismatch");
    if (sky_mask.width != fg.width || sky_mask.height != fg.height)
        throw std::invalid_argument("loss_fg_sky: sky mask shape mismatch");
    const bool masked = occluder.width != 0;
    if (masked && (occluder.width != fg.width || occluder.height != fg.height))
        throw std::invalid_argument("loss_fg_sky: occluder mask shape mismatch");

    FgSkyLossResult res;
    res.d_fg = ImageRGB(fg.width, fg.height);
    res.d_sky = ImageRGB(fg.width, fg.height);
    const size_t np = fg.px.size();
    size_t n_valid = 0;
    for (size_t p = 0; p < np; ++p)
        if (!masked || occluder.px[p] < 0.5) ++n_valid;
    if (n_valid == 0) return res;
    const double inv = 1.0 / (3.0 * double(n_valid));

    for (size_t p = 0; p < np; ++p) {
        if (masked && occluder.px[p] >= 0.5) continue;
        const double m_sky = sky_mask.px[p] >= 0.5 ? 1.0 : 0.0;
        const double w_fg = literal_masks ? 1.0 - m_sky : m_sky;
        const double w_sky = literal_masks ? m_sky : 1.0 - m_sky;
        for (int c = 0; c < 3; ++c) {
            const double vf = fg.px[p][c], vs = sky.px[p][c];
            res.loss += inv * (w_fg * std::abs(vf) + w_sky * std::abs(vs));
            res.d_fg.px[p][c] = inv * w_fg * (vf > 0 ? 1.0 : (vf < 0 ? -1.0 : 0.0));
            res.d_sky.px[p][c] = inv * w_sky * (vs > 0 ? 1.0 : (vs < 0 ? -1.0 : 0.0));
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Sky-depth ordering: exp(-gamma (mean sky depth - mean foreground depth)).
// ---------------------------------------------------------------------------

struct SkyDepthLossResult {
    double loss = 0.0;
    double d_mean_fg = 0.0;
    double d_mean_sky = 0.0;
};

inline SkyDepthLossResult loss_sky_depth(double mean_fg_depth, double mean_sky_depth,
                                         double gamma) {
    SkyDepthLossResult res;
    res.loss = std::exp(-gamma * (mean_sky_depth - mean_fg_depth));
    res.d_mean_sky = -gamma * res.loss;
    res.d_mean_fg = gamma * res.loss;
    return res;
}

// Convenience wrapper over per-Gaussian camera depths: means are taken over
// Gaussians whose accumulated blend weight clears the visibility threshold,
// split by layer. A view with no visible sky (or no visible foreground)
// contributes nothing (`used` = false, zero loss and gradients).
struct SkyDepthSceneResult {
    double loss = 0.0;
    bool used = false;
    std::vector<double> d_depths;  // gradient into each Gaussian's camera depth
};

inline SkyDepthSceneResult loss_sky_depth_scene(const std::vector<double>& depths,
                                                const std::vector<double>& weight_sums,
                                                const std::vector<char>& is_sky, double gamma,
                                                double visibility_threshold) {
    if (depths.size() != weight_sums.size() || depths.size() != is_sky.size())
        throw std::invalid_argument("loss_sky_depth_scene: per-gaussian arrays disagree");
    SkyDepthSceneResult res;
    res.d_depths.assign(depths.size(), 0.0);
    double sum_fg = 0.0, sum_sky = 0.0;
    size_t n_fg = 0, n_sky = 0;
    for (size_t i = 0; i < depths.size(); ++i) {
        if (weight_sums[i] <= visibility_threshold) continue;
        if (is_sky[i]) {
            sum_sky += depths[i];
            ++n_sky;
        } else {
            sum_fg += depths[i];
            ++n_fg;
        }
    }
    if (n_fg == 0 || n_sky == 0) return res;
    const SkyDepthLossResult base =
        loss_sky_depth(sum_fg / double(n_fg), sum_sky / double(n_sky), gamma);
    res.loss = base.loss;
    res.used = true;
    for (size_t i = 0; i < depths.size(); ++i) {
        if (weight_sums[i] <= visibility_threshold) continue;
        res.d_depths[i] =
            is_sky[i] ? base.d_mean_sky / double(n_sky) : base.d_mean_fg / double(n_fg);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Weighted total with the training schedule.
// ---------------------------------------------------------------------------

// Effective multiplier of each term at a given iteration.
struct ActiveWeights {
    double rec = 0, light = 0, normal = 0, scale = 0, fg_sky = 0, sky_depth = 0;
};

inline ActiveWeights schedule_weights(const LossWeights& w, int iteration) {
    ActiveWeights a;
    a.fg_sky = w.lambda_fg_sky;
    if (iteration < w.warmup_iterations) return a;  // warm-up: separation only
    a.rec = 1.0;
    a.light = w.lambda_light;
    a.sky_depth = w.lambda_sky_depth;
    if (iteration >= w.geometry_reg_start) {
        a.normal = w.lambda_normal;
        a.scale = w.lambda_scale;
    }
    return a;
}

// Weighted per-term contributions plus their sum.
struct LossBreakdown {
    double rec = 0, light = 0, normal = 0, scale = 0, fg_sky = 0, sky_depth = 0;
    double total = 0;
};

inline LossBreakdown total_loss(double rec, double light, double normal, double scale,
                                double fg_sky, double sky_depth, const LossWeights& w,
                                int iteration) {
    if (iteration < 0) throw std::invalid_argument("total_loss: negative iteration");
    const ActiveWeights a = schedule_weights(w, iteration);
    LossBreakdown b;
    b.rec = a.rec * rec;
    b.light = a.light * light;
    b.normal = a.normal * normal;
    b.scale = a.scale * scale;
    b.fg_sky = a.fg_sky * fg_sky;
    b.sky_depth = a.sky_depth * sky_depth;
    b.total = b.rec + b.light + b.normal + b.scale + b.fg_sky + b.sky_depth;
    return b;
}

}  // namespace splatlight
