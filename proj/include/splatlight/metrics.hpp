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

#include "image.hpp"
#include "losses.hpp"

namespace splatlight {

// PSNR reported for an exact match (MSE = 0).
inline constexpr double kPsnrCap = 99.0;

struct MetricsReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double mse = 0.0;
    double mae = 0.0;
};

// Image-quality metrics over non-excluded pixels. Unlike the training loss,
// the SSIM map is computed on the full images (no mask zeroing) and only its
// average is restricted to included window centers, so enlarging the mask
// never changes the surviving pixels' contributions.
inline MetricsReport masked_metrics(const ImageRGB& render, const ImageRGB& gt,
                                    const ImageGray& exclusion) {
    if (render.width != gt.width || render.height != gt.height || render.width <= 0)
        throw std::invalid_argument("masked_metrics: image shape mismatch");
    const bool masked = exclusion.width != 0;
    if (masked && (exclusion.width != render.width || exclusion.height != render.height))
        throw std::invalid_argument("masked_metrics: mask shape mismatch");

    const int w = render.width, h = render.height;
    const size_t np = size_t(w) * h;
    size_t n_valid = 0;
    std::vector<char> valid(np, 1);
    for (size_t p = 0; p < np; ++p) {
        if (masked) valid[p] = exclusion.px[p] < 0.5;
        n_valid += valid[p];
    }
    if (n_valid == 0) throw std::invalid_argument("masked_metrics: every pixel is excluded");

    MetricsReport rep;
    const double count = 3.0 * double(n_valid);
    for (size_t p = 0; p < np; ++p) {
        if (!valid[p]) continue;
        const Vec3 d = render.px[p] - gt.px[p];
        rep.mse += (d.x * d.x + d.y * d.y + d.z * d.z) / count;
        rep.mae += (std::abs(d.x) + std::abs(d.y) + std::abs(d.z)) / count;
    }
    rep.psnr = rep.mse > 0.0 ? -10.0 * std::log10(rep.mse) : kPsnrCap;
    rep.psnr = std::min(rep.psnr, kPsnrCap);

    using detail::Plane;
    double ssim_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        Plane x(np), y(np);
        for (size_t p = 0; p < np; ++p) {
            x[p] = render.px[p][c];
            y[p] = gt.px[p][c];
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
        for (size_t p = 0; p < np; ++p) {
            if (!valid[p]) continue;
            const double sxx = kx2[p] - ux[p] * ux[p];
            const double syy = ky2[p] - uy[p] * uy[p];
            const double sxy = kxy[p] - ux[p] * uy[p];
            ssim_sum += ((2.0 * ux[p] * uy[p] + detail::kSsimC1) *
                         (2.0 * sxy + detail::kSsimC2)) /
                        ((ux[p] * ux[p] + uy[p] * uy[p] + detail::kSsimC1) *
                         (sxx + syy + detail::kSsimC2));
        }
    }
    rep.ssim = ssim_sum / count;
    return rep;
}

}  // namespace splatlight
