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
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "image.hpp"
#include "sh.hpp"

namespace splatlight {

// Equirectangular radiance map. Texel (x, y) holds the direction with azimuth
// phi = 2*pi*(x+0.5)/W and polar angle theta = pi*(y+0.5)/H from +z, so the
// top row is the zenith.
struct EquirectMap {
    int width = 0, height = 0;
    std::vector<Vec3> px;  // row-major linear radiance

    EquirectMap() = default;
    EquirectMap(int w, int h) : width(w), height(h), px(size_t(w) * h) {}

    Vec3& at(int x, int y) { return px[size_t(y) * width + x]; }
    const Vec3& at(int x, int y) const { return px[size_t(y) * width + x]; }
};

enum class RotationAxis { X, Y, Z };

inline Vec3 equirect_direction(const EquirectMap& map, double x, double y) {
    const double phi = 2.0 * kPi * (x + 0.5) / map.width;
    const double theta = kPi * (y + 0.5) / map.height;
    const double st = std::sin(theta);
    return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

// Bilinear lookup by direction: wraps in azimuth; rows past a pole continue
// on the far side (mirrored latitude, azimuth shifted by half a turn) so the
// interpolation stays second-order accurate at the zenith and nadir.
inline Vec3 sample_equirect(const EquirectMap& map, const Vec3& dir_unit) {
    const double theta = std::acos(std::clamp(dir_unit.z, -1.0, 1.0));
    double phi = std::atan2(dir_unit.y, dir_unit.x);
    if (phi < 0.0) phi += 2.0 * kPi;
    const double fx = phi / (2.0 * kPi) * map.width - 0.5;
    const double fy = theta / kPi * map.height - 0.5;
    const int x0 = int(std::floor(fx));
    const int y0 = int(std::floor(fy));
    const double ax = fx - x0, ay = fy - y0;
    auto fetch = [&](int x, int y) -> const Vec3& {
        if (y < 0) {
            y = -y - 1;
            x += map.width / 2;
        } else if (y >= map.height) {
            y = 2 * map.height - y - 1;
            x += map.width / 2;
        }
        x %= map.width;
        if (x < 0) x += map.width;
        return map.at(x, y);
    };
    return fetch(x0, y0) * ((1 - ax) * (1 - ay)) + fetch(x0 + 1, y0) * (ax * (1 - ay)) +
           fetch(x0, y0 + 1) * ((1 - ax) * ay) + fetch(x0 + 1, y0 + 1) * (ax * ay);
}

// Loads a radiance map from color PFM (either endianness) or 8-bit PNG
// (linearized through inverse gamma 2.2). Negative texels clamp to zero.
inline EquirectMap load_map(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("envmap: cannot open: " + path);
    char magic[2] = {0, 0};
    probe.read(magic, 2);
    probe.close();

    ImageRGB img;
    if (magic[0] == 'P' && magic[1] == 'F') {
        img = load_pfm_rgb(path);
    } else if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P') {
        img = load_png(path);
        for (auto& p : img.px)
            p = {std::pow(p.x, 2.2), std::pow(p.y, 2.2), std::pow(p.z, 2.2)};
    } else {
        throw std::runtime_error("envmap: unsupported format (need color PFM or PNG): " +
                                 path);
    }
    EquirectMap map(img.width, img.height);
    for (size_t p = 0; p < img.px.size(); ++p) {
        const Vec3& v = img.px[p];
        if (!(std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z)))
            throw std::runtime_error("envmap: non-finite radiance in " + path);
        map.px[p] = {std::max(0.0, v.x), std::max(0.0, v.y), std::max(0.0, v.z)};
    }
    return map;
}

inline void save_map_pfm(const EquirectMap& map, const std::string& path) {
    ImageRGB img(map.width, map.height);
    img.px = map.px;
    save_pfm_rgb(img, path);
}

// Projection onto the SH basis with per-texel solid angle
// sin(theta) * (2*pi/W) * (pi/H).
inline ShCoeffs map_to_sh(const EquirectMap& map, int degree = 4) {
    if (map.width <= 0 || map.height <= 0)
        throw std::invalid_argument("envmap: empty map");
    std::vector<ShSample> samples;
    samples.reserve(map.px.size());
    const double patch = (2.0 * kPi / map.width) * (kPi / map.height);
    for (int y = 0; y < map.height; ++y) {
        const double theta = kPi * (y + 0.5) / map.height;
        const double weight = std::sin(theta) * patch;
        for (int x = 0; x < map.width; ++x)
            samples.push_back({equirect_direction(map, x, y), map.at(x, y), weight});
    }
    return project_to_sh(samples, degree);
}

inline Mat3 axis_rotation(RotationAxis axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    switch (axis) {
        case RotationAxis::X:
            return Mat3::from_rows({1, 0, 0}, {0, c, -s}, {0, s, c});
        case RotationAxis::Y:
            return Mat3::from_rows({c, 0, s}, {0, 1, 0}, {-s, 0, c});
        default:
            return Mat3::from_rows({c, -s, 0}, {s, c, 0}, {0, 0, 1});
    }
}

// Rotates the map by resampling each output direction through the inverse
// rotation with bilinear interpolation (default axis y, the relighting sweep
// convention; scene-up stays z).
inline EquirectMap rotate_map(const EquirectMap& map, double angle,
                              RotationAxis axis = RotationAxis::Y) {
    if (map.width <= 0 || map.height <= 0)
        throw std::invalid_argument("envmap: empty map");
    const Mat3 inverse = axis_rotation(axis, -angle);
    EquirectMap out(map.width, map.height);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            out.at(x, y) = sample_equirect(map, inverse * equirect_direction(map, x, y));
    return out;
}

// Renders SH coefficients back to a map for visualization; negative radiance
// clamps to zero for display.
inline EquirectMap sh_to_map(const ShCoeffs& sh, int width, int height) {
    sh.check();
    if (width <= 0 || height <= 0) throw std::invalid_argument("envmap: empty target");
    EquirectMap map(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const Vec3 v = eval_sh(sh, equirect_direction(map, x, y));
            map.at(x, y) = {std::max(0.0, v.x), std::max(0.0, v.y), std::max(0.0, v.z)};
        }
    return map;
}

}  // namespace splatlight
