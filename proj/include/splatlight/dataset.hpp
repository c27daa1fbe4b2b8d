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
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "camera.hpp"
#include "image.hpp"
#include "scene.hpp"

namespace splatlight {

struct DatasetView {
    std::string id;
    Camera camera;
    ImageRGB image;
    ImageGray sky_mask;       // 1 = sky pixel
    ImageGray occluder_mask;  // 1 = excluded everywhere
};

struct Dataset {
    std::vector<DatasetView> views;
    std::vector<PointSample> points;
};

// One camera per line: id fx fy cx cy width height followed by the row-major
// 3x4 world-to-camera matrix [R | t].
inline std::vector<std::pair<std::string, Camera>> load_cameras_txt(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("dataset: cannot open " + path);
    std::vector<std::pair<std::string, Camera>> cams;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string id;
        Camera cam;
        double m[12];
        ss >> id >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height;
        for (double& v : m) ss >> v;
        if (!ss)
            throw std::runtime_error("dataset: malformed camera line " +
                                     std::to_string(line_no) + " in " + path);
        cam.rotation = Mat3::from_rows({m[0], m[1], m[2]}, {m[4], m[5], m[6]},
                                       {m[8], m[9], m[10]});
        cam.translation = {m[3], m[7], m[11]};
        cam.check();
        cams.emplace_back(id, cam);
    }
    if (cams.empty()) throw std::runtime_error("dataset: no cameras in " + path);
    return cams;
}

inline void save_cameras_txt(const std::vector<std::pair<std::string, Camera>>& cams,
                             const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dataset: cannot write " + path);
    os.precision(17);
    for (const auto& [id, cam] : cams) {
        os << id << " " << cam.fx << " " << cam.fy << " " << cam.cx << " " << cam.cy << " "
           << cam.width << " " << cam.height;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) os << " " << cam.rotation.row(r)[c];
            os << " " << cam.translation[r];
        }
        os << "\n";
    }
    if (!os) throw std::runtime_error("dataset: write failed: " + path);
}

// Seed cloud: "x y z r g b" per line. Colors are auto-detected as [0,1] or
// [0,255] (any component above 1 switches the whole file to the byte range).
inline std::vector<PointSample> load_points_txt(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("dataset: cannot open " + path);
    std::vector<PointSample> pts;
    double max_color = 0.0;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        PointSample p;
        ss >> p.position.x >> p.position.y >> p.position.z >> p.color.x >> p.color.y >>
            p.color.z;
        if (!ss)
            throw std::runtime_error("dataset: malformed point line " +
                                     std::to_string(line_no) + " in " + path);
        max_color = std::max({max_color, p.color.x, p.color.y, p.color.z});
        pts.push_back(p);
    }
    if (pts.empty()) throw std::runtime_error("dataset: no points in " + path);
    if (max_color > 1.0 + 1e-9)
        for (PointSample& p : pts) p.color = p.color * (1.0 / 255.0);
    for (PointSample& p : pts) p.color = clamp01(p.color);
    return pts;
}

inline void save_points_txt(const std::vector<PointSample>& pts, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dataset: cannot write " + path);
    os.precision(17);
    for (const PointSample& p : pts)
        os << p.position.x << " " << p.position.y << " " << p.position.z << " " << p.color.x
           << " " << p.color.y << " " << p.color.z << "\n";
    if (!os) throw std::runtime_error("dataset: write failed: " + path);
}

namespace detail {

// Mask PNGs use 255 = masked; any channel at or above half turns the pixel on.
inline ImageGray png_to_mask(const ImageRGB& img) {
    ImageGray mask(img.width, img.height);
    for (size_t p = 0; p < img.px.size(); ++p)
        mask.px[p] = (img.px[p].x >= 0.5 || img.px[p].y >= 0.5 || img.px[p].z >= 0.5) ? 1.0
                                                                                      : 0.0;
    return mask;
}

}  // namespace detail

// Loads `images/<id>.png`, `masks_sky/<id>.png`, `masks_occluder/<id>.png`,
// `cameras.txt`, and `points.txt` from a dataset directory. Missing mask
// files mean "nothing masked"; anything else missing is an error naming the
// path. Views are ordered by id.
inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset ds;
    auto cams = load_cameras_txt((fs::path(dir) / "cameras.txt").string());
    std::sort(cams.begin(), cams.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    for (const auto& [id, cam] : cams) {
        DatasetView view;
        view.id = id;
        view.camera = cam;
        const fs::path img_path = fs::path(dir) / "images" / (id + ".png");
        if (!fs::exists(img_path))
            throw std::runtime_error("dataset: missing image " + img_path.string());
        view.image = load_png(img_path.string());
        if (view.image.width != cam.width || view.image.height != cam.height)
            throw std::runtime_error("dataset: image size disagrees with camera for " +
                                     img_path.string());

        const fs::path sky_path = fs::path(dir) / "masks_sky" / (id + ".png");
        if (fs::exists(sky_path)) {
            view.sky_mask = detail::png_to_mask(load_png(sky_path.string()));
            if (view.sky_mask.width != cam.width || view.sky_mask.height != cam.height)
                throw std::runtime_error("dataset: mask size disagrees with camera for " +
                                         sky_path.string());
        } else {
            view.sky_mask = ImageGray(cam.width, cam.height);
        }
        const fs::path occ_path = fs::path(dir) / "masks_occluder" / (id + ".png");
        if (fs::exists(occ_path)) {
            view.occluder_mask = detail::png_to_mask(load_png(occ_path.string()));
            if (view.occluder_mask.width != cam.width ||
                view.occluder_mask.height != cam.height)
                throw std::runtime_error("dataset: mask size disagrees with camera for " +
                                         occ_path.string());
        } else {
            view.occluder_mask = ImageGray(cam.width, cam.height);
        }
        ds.views.push_back(std::move(view));
    }
    ds.points = load_points_txt((fs::path(dir) / "points.txt").string());
    return ds;
}

}  // namespace splatlight
