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

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "splatlight/checkpoint.hpp"
#include "splatlight/dataset.hpp"
#include "splatlight/image.hpp"

using namespace splatlight;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per call; contents persist until the OS cleans the
// temp root, which is fine for test artifacts.
fs::path scratch_dir(const std::string& tag) {
    static int counter = 0;
    const auto stamp =
        std::chrono::steady_clock::now().time_since_epoch().count() + 1000 * counter++;
    fs::path dir =
        fs::temp_directory_path() / ("splatlight_io_" + tag + "_" + std::to_string(stamp));
    fs::create_directories(dir);
    return dir;
}

ImageRGB ramp_image(int w, int h, int offset) {
    ImageRGB img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y)[c] = ((x + w * y + 17 * c + offset) % 256) / 255.0;
    return img;
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream os(path);
    os << body;
}

Camera sample_camera(int w, int h, const Vec3& eye) {
    Camera cam = look_at_camera(eye, Vec3{0, 0, 0}, Vec3{0, 1, 0}, 37.5, w, h);
    cam.cx += 0.25;
    cam.cy -= 0.125;
    return cam;
}

}  // namespace

TEST_CASE("png round trip preserves every 8-bit value") {
    const fs::path dir = scratch_dir("png");
    const ImageRGB img = ramp_image(32, 8, 3);
    save_png(img, (dir / "ramp.png").string());
    const ImageRGB back = load_png((dir / "ramp.png").string());
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (size_t i = 0; i < img.px.size(); ++i)
        for (int c = 0; c < 3; ++c) REQUIRE(back.px[i][c] == img.px[i][c]);
}

TEST_CASE("pfm round trips are exact at float precision") {
    const fs::path dir = scratch_dir("pfm");
    Rng rng(11);

    ImageGray depth(9, 6);
    for (double& v : depth.px) v = rng.uniform(0.01, 80.0);
    save_pfm(depth, (dir / "depth.pfm").string());
    const ImageGray depth_back = load_pfm((dir / "depth.pfm").string());
    REQUIRE(depth_back.width == 9);
    REQUIRE(depth_back.height == 6);
    for (size_t i = 0; i < depth.px.size(); ++i)
        REQUIRE(depth_back.px[i] == double(float(depth.px[i])));

    ImageRGB color(7, 5);
    for (Vec3& v : color.px) v = {rng.uniform(0, 4), rng.uniform(0, 4), rng.uniform(0, 4)};
    save_pfm_rgb(color, (dir / "color.pfm").string());
    const ImageRGB color_back = load_pfm_rgb((dir / "color.pfm").string());
    REQUIRE(color_back.width == 7);
    REQUIRE(color_back.height == 5);
    for (size_t i = 0; i < color.px.size(); ++i)
        for (int c = 0; c < 3; ++c) REQUIRE(color_back.px[i][c] == double(float(color.px[i][c])));
}

TEST_CASE("camera list round trips through text") {
    const fs::path dir = scratch_dir("cams");
    std::vector<std::pair<std::string, Camera>> cams;
    cams.emplace_back("view_a", sample_camera(64, 48, Vec3{0.3, 1.7, 9.0}));
    cams.emplace_back("view_b", sample_camera(32, 32, Vec3{-4.0, 0.2, 6.5}));
    save_cameras_txt(cams, (dir / "cameras.txt").string());
    const auto back = load_cameras_txt((dir / "cameras.txt").string());
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < cams.size(); ++i) {
        REQUIRE(back[i].first == cams[i].first);
        const Camera& a = cams[i].second;
        const Camera& b = back[i].second;
        REQUIRE(b.fx == a.fx);
        REQUIRE(b.fy == a.fy);
        REQUIRE(b.cx == a.cx);
        REQUIRE(b.cy == a.cy);
        REQUIRE(b.width == a.width);
        REQUIRE(b.height == a.height);
        for (int r = 0; r < 3; ++r) {
            REQUIRE(b.translation[r] == a.translation[r]);
            for (int c = 0; c < 3; ++c) REQUIRE(b.rotation.m[r][c] == a.rotation.m[r][c]);
        }
    }
}

TEST_CASE("camera parser rejects malformed lines with context") {
    const fs::path dir = scratch_dir("cams_bad");
    write_text(dir / "cameras.txt", "# header\nview_a 50 50 16 16 32 32 1 0 0\n");
    try {
        load_cameras_txt((dir / "cameras.txt").string());
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("cameras.txt") != std::string::npos);
        REQUIRE(msg.find("2") != std::string::npos);  // failing line number
    }
}

TEST_CASE("point cloud parser detects 8-bit and unit color ranges") {
    const fs::path dir = scratch_dir("points");

    write_text(dir / "bytes.txt", "0.5 -1.0 2.0 255 128 0\n1 2 3 0 0 64\n");
    const auto bytes = load_points_txt((dir / "bytes.txt").string());
    REQUIRE(bytes.size() == 2);
    REQUIRE(bytes[0].position.x == 0.5);
    REQUIRE(bytes[0].color.x == Approx(1.0));
    REQUIRE(bytes[0].color.y == Approx(128.0 / 255.0));
    REQUIRE(bytes[0].color.z == 0.0);
    REQUIRE(bytes[1].color.z == Approx(64.0 / 255.0));

    write_text(dir / "unit.txt", "0 0 1 0.25 0.5 1.0\n");
    const auto unit = load_points_txt((dir / "unit.txt").string());
    REQUIRE(unit.size() == 1);
    REQUIRE(unit[0].color.x == 0.25);
    REQUIRE(unit[0].color.y == 0.5);
    REQUIRE(unit[0].color.z == 1.0);

    // Round trip through the writer keeps unit-range colors unscaled.
    save_points_txt(bytes, (dir / "echo.txt").string());
    const auto echo = load_points_txt((dir / "echo.txt").string());
    REQUIRE(echo.size() == 2);
    for (size_t i = 0; i < echo.size(); ++i) {
        REQUIRE(echo[i].position.x == bytes[i].position.x);
        REQUIRE(echo[i].color.x == Approx(bytes[i].color.x));
        REQUIRE(echo[i].color.y == Approx(bytes[i].color.y));
        REQUIRE(echo[i].color.z == Approx(bytes[i].color.z));
    }

    write_text(dir / "short.txt", "1 2 3 4 5\n");
    REQUIRE_THROWS_AS(load_points_txt((dir / "short.txt").string()), std::runtime_error);
}

namespace {

fs::path build_dataset_dir(bool with_sky_mask_a, bool with_image_b) {
    const fs::path dir = scratch_dir("dataset");
    std::vector<std::pair<std::string, Camera>> cams;
    cams.emplace_back("b", sample_camera(16, 12, Vec3{0, 0, 8}));
    cams.emplace_back("a", sample_camera(16, 12, Vec3{2, 1, 8}));
    save_cameras_txt(cams, (dir / "cameras.txt").string());

    fs::create_directories(dir / "images");
    save_png(ramp_image(16, 12, 5), (dir / "images" / "a.png").string());
    if (with_image_b) save_png(ramp_image(16, 12, 9), (dir / "images" / "b.png").string());

    if (with_sky_mask_a) {
        fs::create_directories(dir / "masks_sky");
        ImageRGB mask(16, 12);
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 16; ++x) {
                const double v = (y < 6) ? 1.0 : 0.0;
                mask.at(x, y) = {v, v, v};
            }
        save_png(mask, (dir / "masks_sky" / "a.png").string());
    }

    write_text(dir / "points.txt", "0 0 0 255 0 0\n1 1 1 0 255 0\n");
    return dir;
}

}  // namespace

TEST_CASE("dataset loads sorted views with optional masks") {
    const fs::path dir = build_dataset_dir(true, true);
    const Dataset ds = load_dataset(dir.string());

    REQUIRE(ds.views.size() == 2);
    REQUIRE(ds.views[0].id == "a");  // sorted by id, not file order
    REQUIRE(ds.views[1].id == "b");
    REQUIRE(ds.points.size() == 2);
    REQUIRE(ds.points[0].color.x == Approx(1.0));

    const DatasetView& a = ds.views[0];
    REQUIRE(a.image.width == a.camera.width);
    REQUIRE(a.sky_mask.at(3, 2) == 1.0);
    REQUIRE(a.sky_mask.at(3, 9) == 0.0);
    for (double v : a.occluder_mask.px) REQUIRE(v == 0.0);  // absent dir -> zeros

    const DatasetView& b = ds.views[1];
    for (double v : b.sky_mask.px) REQUIRE(v == 0.0);
    REQUIRE(b.image.at(4, 3).x == ramp_image(16, 12, 9).at(4, 3).x);
}

TEST_CASE("dataset errors name the missing image") {
    const fs::path dir = build_dataset_dir(false, false);
    try {
        load_dataset(dir.string());
        FAIL("expected a missing-image error");
    } catch (const std::runtime_error& e) {
        REQUIRE(std::string(e.what()).find("b.png") != std::string::npos);
    }
}

namespace {

Scene sample_scene() {
    Rng rng(31);
    Scene scene;
    scene.dome.center = {0.5, -0.25, 1.0};
    scene.dome.radius = 42.0;
    for (int i = 0; i < 3; ++i) {
        ForegroundGaussian g;
        g.position = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        g.rotation = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.log_scales = {rng.uniform(-3, 0), rng.uniform(-3, 0), rng.uniform(-3, 0)};
        g.opacity_logit = rng.uniform(-2, 2);
        g.material.albedo = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
        g.material.roughness = rng.uniform(0, 1);
        scene.foreground.push_back(g);
    }
    for (int i = 0; i < 2; ++i) {
        SkyGaussian g;
        g.theta = rng.uniform(0.05, 1.5);
        g.phi = rng.uniform(0.05, 3.1);
        g.rotation = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.log_scales = {rng.uniform(-2, 1), rng.uniform(-2, 1), rng.uniform(-2, 1)};
        g.opacity_logit = rng.uniform(-2, 2);
        scene.sky.push_back(g);
    }
    return scene;
}

}  // namespace

TEST_CASE("scene checkpoint round trips bit-exact") {
    const fs::path dir = scratch_dir("ply");
    const Scene scene = sample_scene();
    const std::string path = (dir / "scene.ply").string();
    save_scene_ply(scene, path);
    const Scene back = load_scene_ply(path, scene.dome);

    REQUIRE(back.foreground.size() == scene.foreground.size());
    REQUIRE(back.sky.size() == scene.sky.size());
    for (size_t i = 0; i < scene.foreground.size(); ++i) {
        const ForegroundGaussian& a = scene.foreground[i];
        const ForegroundGaussian& b = back.foreground[i];
        REQUIRE(b.position.x == a.position.x);
        REQUIRE(b.position.y == a.position.y);
        REQUIRE(b.position.z == a.position.z);
        REQUIRE(b.rotation.w == a.rotation.w);
        REQUIRE(b.rotation.x == a.rotation.x);
        REQUIRE(b.rotation.y == a.rotation.y);
        REQUIRE(b.rotation.z == a.rotation.z);
        REQUIRE(b.log_scales.x == a.log_scales.x);
        REQUIRE(b.log_scales.y == a.log_scales.y);
        REQUIRE(b.log_scales.z == a.log_scales.z);
        REQUIRE(b.opacity_logit == a.opacity_logit);
        REQUIRE(b.material.albedo.x == a.material.albedo.x);
        REQUIRE(b.material.albedo.y == a.material.albedo.y);
        REQUIRE(b.material.albedo.z == a.material.albedo.z);
        REQUIRE(b.material.roughness == a.material.roughness);
    }
    for (size_t i = 0; i < scene.sky.size(); ++i) {
        const SkyGaussian& a = scene.sky[i];
        const SkyGaussian& b = back.sky[i];
        REQUIRE(b.theta == a.theta);
        REQUIRE(b.phi == a.phi);
        REQUIRE(b.rotation.w == a.rotation.w);
        REQUIRE(b.log_scales.y == a.log_scales.y);
        REQUIRE(b.opacity_logit == a.opacity_logit);
        const Vec3 pa = sky_position(a, scene.dome);
        const Vec3 pb = sky_position(b, back.dome);
        REQUIRE(pb.x == pa.x);
        REQUIRE(pb.y == pa.y);
        REQUIRE(pb.z == pa.z);
    }
}

TEST_CASE("scene checkpoint rejects foreign or truncated files") {
    const fs::path dir = scratch_dir("ply_bad");
    write_text(dir / "not_ply.ply", "hello world\n");
    REQUIRE_THROWS_AS(load_scene_ply((dir / "not_ply.ply").string(), SkyDome{}),
                      std::runtime_error);

    const Scene scene = sample_scene();
    const std::string path = (dir / "scene.ply").string();
    save_scene_ply(scene, path);
    const auto full = fs::file_size(path);
    fs::resize_file(path, full - 9);
    REQUIRE_THROWS_AS(load_scene_ply(path, scene.dome), std::runtime_error);

    REQUIRE_THROWS_AS(load_scene_ply((dir / "absent.ply").string(), SkyDome{}),
                      std::runtime_error);
}

TEST_CASE("meta sidecar round trips dome, iteration, and light blocks") {
    const fs::path dir = scratch_dir("meta");
    Rng rng(7);
    SceneMeta meta;
    meta.dome.center = {1.25, -3.5, 0.0625};
    meta.dome.radius = 55.5;
    meta.iteration = 4321;
    for (int k = 0; k < 2; ++k) {
        ImageLightRecord rec;
        rec.id = (k == 0) ? "cam_00" : "cam_01";
        rec.light = ShCoeffs::zeros(4);
        for (int j = 0; j < rec.light.count(); ++j)
            rec.light.c[j] = {rng.normal(), rng.normal(), rng.normal()};
        rec.sky = ShCoeffs::zeros(1);
        for (int j = 0; j < rec.sky.count(); ++j)
            rec.sky.c[j] = {rng.normal(), rng.normal(), rng.normal()};
        meta.images.push_back(rec);
    }

    const std::string path = (dir / "scene.meta").string();
    save_scene_meta(meta, path);
    const SceneMeta back = load_scene_meta(path);

    REQUIRE(back.dome.center.x == meta.dome.center.x);
    REQUIRE(back.dome.center.y == meta.dome.center.y);
    REQUIRE(back.dome.center.z == meta.dome.center.z);
    REQUIRE(back.dome.radius == meta.dome.radius);
    REQUIRE(back.iteration == meta.iteration);
    REQUIRE(back.images.size() == 2);
    for (size_t k = 0; k < 2; ++k) {
        REQUIRE(back.images[k].id == meta.images[k].id);
        REQUIRE(back.images[k].light.degree == 4);
        REQUIRE(back.images[k].sky.degree == 1);
        for (int j = 0; j < meta.images[k].light.count(); ++j)
            for (int c = 0; c < 3; ++c)
                REQUIRE(back.images[k].light.c[j][c] == meta.images[k].light.c[j][c]);
        for (int j = 0; j < meta.images[k].sky.count(); ++j)
            for (int c = 0; c < 3; ++c)
                REQUIRE(back.images[k].sky.c[j][c] == meta.images[k].sky.c[j][c]);
    }

    write_text(dir / "bad.meta", "scene meta 9\n");
    REQUIRE_THROWS_AS(load_scene_meta((dir / "bad.meta").string()), std::runtime_error);
}

TEST_CASE("tensor container round trips names, shapes, and payloads") {
    const fs::path dir = scratch_dir("tensors");
    Rng rng(19);
    std::vector<NamedTensor> tensors;
    tensors.push_back({"scalar", {}, {3.25}});
    NamedTensor vec{"adam.m.positions", {5}, {}};
    for (int i = 0; i < 5; ++i) vec.data.push_back(rng.normal());
    tensors.push_back(vec);
    NamedTensor mat{"mlp.trunk1.w", {4, 6}, {}};
    for (int i = 0; i < 24; ++i) mat.data.push_back(rng.normal());
    tensors.push_back(mat);

    const std::string path = (dir / "state.tensors").string();
    save_tensors(tensors, path);
    const auto back = load_tensors(path);
    REQUIRE(back.size() == 3);
    for (size_t i = 0; i < tensors.size(); ++i) {
        REQUIRE(back[i].name == tensors[i].name);
        REQUIRE(back[i].dims == tensors[i].dims);
        REQUIRE(back[i].data == tensors[i].data);
    }
    REQUIRE(find_tensor(back, "mlp.trunk1.w").data[7] == mat.data[7]);
    REQUIRE_THROWS_AS(find_tensor(back, "missing"), std::runtime_error);

    std::vector<NamedTensor> bad_shape;
    bad_shape.push_back({"broken", {2, 2}, {1.0, 2.0, 3.0}});
    REQUIRE_THROWS_AS(save_tensors(bad_shape, (dir / "bad.tensors").string()),
                      std::invalid_argument);

    write_text(dir / "foreign.tensors", "NOTMAGIC........");
    REQUIRE_THROWS_AS(load_tensors((dir / "foreign.tensors").string()), std::runtime_error);
}

TEST_CASE("checkpoint writes leave no temporary files behind") {
    const fs::path dir = scratch_dir("atomic");
    save_scene_ply(sample_scene(), (dir / "scene.ply").string());
    SceneMeta meta;
    save_scene_meta(meta, (dir / "scene.meta").string());
    save_tensors({}, (dir / "state.tensors").string());
    int tmp_count = 0;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".tmp") ++tmp_count;
    REQUIRE(tmp_count == 0);
    REQUIRE(fs::exists(dir / "scene.ply"));
    REQUIRE(fs::exists(dir / "scene.meta"));
    REQUIRE(fs::exists(dir / "state.tensors"));
}
