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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scene.hpp"
#include "sh.hpp"

namespace splatlight {

// ---------------------------------------------------------------------------
// Scene checkpoint: binary little-endian PLY, one vertex per Gaussian.
// Property order is fixed: x y z qw qx qy qz log_sx log_sy log_sz
// opacity_logit albedo_r albedo_g albedo_b roughness is_sky(uchar) theta phi.
// Foreground rows keep theta/phi at 0; sky rows keep material at 0 (their
// x/y/z mirror the derived dome position for inspection only).
// ---------------------------------------------------------------------------

namespace detail {

inline const char* kPlyDoubleProps[] = {"x",           "y",        "z",
                                        "qw",          "qx",       "qy",
                                        "qz",          "log_sx",   "log_sy",
                                        "log_sz",      "opacity_logit", "albedo_r",
                                        "albedo_g",    "albedo_b", "roughness"};

inline void write_atomic(const std::string& path, const std::string& payload) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("checkpoint: cannot write " + tmp);
        os.write(payload.data(), std::streamsize(payload.size()));
        if (!os) throw std::runtime_error("checkpoint: write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline void append_f64(std::string& buf, double v) {
    char raw[8];
    std::memcpy(raw, &v, 8);
    buf.append(raw, 8);
}

}  // namespace detail

inline void save_scene_ply(const Scene& scene, const std::string& path) {
    const size_t n = scene.foreground.size() + scene.sky.size();
    std::string buf;
    {
        std::ostringstream head;
        head << "ply\nformat binary_little_endian 1.0\n"
             << "comment gaussian scene checkpoint\n"
             << "element vertex " << n << "\n";
        for (const char* p : detail::kPlyDoubleProps) head << "property double " << p << "\n";
        head << "property uchar is_sky\nproperty double theta\nproperty double phi\n"
             << "end_header\n";
        buf = head.str();
    }
    auto write_row = [&](const Vec3& pos, const Vec4& q, const Vec3& ls, double ol,
                         const Material& mat, bool is_sky, double theta, double phi) {
        detail::append_f64(buf, pos.x);
        detail::append_f64(buf, pos.y);
        detail::append_f64(buf, pos.z);
        detail::append_f64(buf, q.w);
        detail::append_f64(buf, q.x);
        detail::append_f64(buf, q.y);
        detail::append_f64(buf, q.z);
        detail::append_f64(buf, ls.x);
        detail::append_f64(buf, ls.y);
        detail::append_f64(buf, ls.z);
        detail::append_f64(buf, ol);
        detail::append_f64(buf, mat.albedo.x);
        detail::append_f64(buf, mat.albedo.y);
        detail::append_f64(buf, mat.albedo.z);
        detail::append_f64(buf, mat.roughness);
        buf.push_back(is_sky ? char(1) : char(0));
        detail::append_f64(buf, theta);
        detail::append_f64(buf, phi);
    };
    for (const ForegroundGaussian& g : scene.foreground)
        write_row(g.position, g.rotation, g.log_scales, g.opacity_logit, g.material, false,
                  0.0, 0.0);
    for (const SkyGaussian& g : scene.sky)
        write_row(sky_position(g, scene.dome), g.rotation, g.log_scales, g.opacity_logit,
                  Material{}, true, g.theta, g.phi);
    detail::write_atomic(path, buf);
}

// The dome geometry travels in the meta sidecar; pass it in to rebuild sky
// Gaussians (their dome coordinates are authoritative, positions derived).
inline Scene load_scene_ply(const std::string& path, const SkyDome& dome) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string line;
    size_t n = 0;
    std::vector<std::string> props;
    bool header_done = false;
    if (!std::getline(is, line) || line != "ply")
        throw std::runtime_error("checkpoint: not a PLY file: " + path);
    if (!std::getline(is, line) || line != "format binary_little_endian 1.0")
        throw std::runtime_error("checkpoint: unsupported PLY format in " + path);
    while (std::getline(is, line)) {
        if (line.rfind("comment", 0) == 0) continue;
        if (line.rfind("element vertex ", 0) == 0) {
            n = std::stoull(line.substr(15));
            continue;
        }
        if (line.rfind("property ", 0) == 0) {
            props.push_back(line.substr(9));
            continue;
        }
        if (line == "end_header") {
            header_done = true;
            break;
        }
        throw std::runtime_error("checkpoint: unexpected PLY header line: " + line);
    }
    std::vector<std::string> expected;
    for (const char* p : detail::kPlyDoubleProps) expected.push_back(std::string("double ") + p);
    expected.push_back("uchar is_sky");
    expected.push_back("double theta");
    expected.push_back("double phi");
    if (!header_done || props != expected)
        throw std::runtime_error("checkpoint: unexpected property layout in " + path);

    Scene scene;
    scene.dome = dome;
    for (size_t i = 0; i < n; ++i) {
        double d[15];
        char flag = 0;
        double theta = 0, phi = 0;
        is.read(reinterpret_cast<char*>(d), sizeof(d));
        is.read(&flag, 1);
        is.read(reinterpret_cast<char*>(&theta), 8);
        is.read(reinterpret_cast<char*>(&phi), 8);
        if (!is) throw std::runtime_error("checkpoint: truncated PLY data in " + path);
        if (flag) {
            SkyGaussian g;
            g.theta = theta;
            g.phi = phi;
            g.rotation = {d[3], d[4], d[5], d[6]};
            g.log_scales = {d[7], d[8], d[9]};
            g.opacity_logit = d[10];
            scene.sky.push_back(g);
        } else {
            ForegroundGaussian g;
            g.position = {d[0], d[1], d[2]};
            g.rotation = {d[3], d[4], d[5], d[6]};
            g.log_scales = {d[7], d[8], d[9]};
            g.opacity_logit = d[10];
            g.material.albedo = {d[11], d[12], d[13]};
            g.material.roughness = d[14];
            scene.foreground.push_back(g);
        }
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Meta sidecar: dome geometry, training iteration, and per-image decoded SH
// blocks (light then sky per image id), in the SH text format.
// ---------------------------------------------------------------------------

struct ImageLightRecord {
    std::string id;
    ShCoeffs light;  // degree 4
    ShCoeffs sky;    // degree 1
};

struct SceneMeta {
    SkyDome dome;
    int iteration = 0;
    std::vector<ImageLightRecord> images;
};

inline void save_scene_meta(const SceneMeta& meta, const std::string& path) {
    std::ostringstream os;
    os.precision(17);
    os << "scene meta 1\n";
    os << "dome_center " << meta.dome.center.x << " " << meta.dome.center.y << " "
       << meta.dome.center.z << "\n";
    os << "dome_radius " << meta.dome.radius << "\n";
    os << "iteration " << meta.iteration << "\n";
    os << "images " << meta.images.size() << "\n";
    for (const ImageLightRecord& rec : meta.images) {
        os << "image " << rec.id << "\n";
        save_sh_text(rec.light, os);
        save_sh_text(rec.sky, os);
    }
    detail::write_atomic(path, os.str());
}

inline SceneMeta load_scene_meta(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != "scene meta 1")
        throw std::runtime_error("checkpoint: malformed meta header in " + path);
    SceneMeta meta;
    std::string key;
    size_t image_count = 0;
    is >> key >> meta.dome.center.x >> meta.dome.center.y >> meta.dome.center.z;
    if (!is || key != "dome_center")
        throw std::runtime_error("checkpoint: malformed dome_center in " + path);
    is >> key >> meta.dome.radius;
    if (!is || key != "dome_radius")
        throw std::runtime_error("checkpoint: malformed dome_radius in " + path);
    is >> key >> meta.iteration;
    if (!is || key != "iteration")
        throw std::runtime_error("checkpoint: malformed iteration in " + path);
    is >> key >> image_count;
    if (!is || key != "images")
        throw std::runtime_error("checkpoint: malformed image count in " + path);
    for (size_t i = 0; i < image_count; ++i) {
        ImageLightRecord rec;
        is >> key >> rec.id;
        if (!is || key != "image")
            throw std::runtime_error("checkpoint: malformed image record in " + path);
        is.ignore();  // end of the id line
        rec.light = load_sh_text(is);
        rec.sky = load_sh_text(is);
        meta.images.push_back(std::move(rec));
    }
    return meta;
}

// ---------------------------------------------------------------------------
// Named-tensor container: magic "SLTNSR01", u64 count, then per tensor
// u64 name length, name bytes, u64 rank, u64 dims..., f64 payload.
// ---------------------------------------------------------------------------

struct NamedTensor {
    std::string name;
    std::vector<uint64_t> dims;
    std::vector<double> data;
};

inline void save_tensors(const std::vector<NamedTensor>& tensors, const std::string& path) {
    std::string buf;
    buf.append("SLTNSR01", 8);
    auto append_u64 = [&](uint64_t v) {
        char raw[8];
        std::memcpy(raw, &v, 8);
        buf.append(raw, 8);
    };
    append_u64(tensors.size());
    for (const NamedTensor& t : tensors) {
        uint64_t expect = 1;
        for (uint64_t d : t.dims) expect *= d;
        if (expect != t.data.size())
            throw std::invalid_argument("checkpoint: tensor shape disagrees with data: " +
                                        t.name);
        append_u64(t.name.size());
        buf.append(t.name);
        append_u64(t.dims.size());
        for (uint64_t d : t.dims) append_u64(d);
        const size_t bytes = t.data.size() * sizeof(double);
        const size_t at = buf.size();
        buf.resize(at + bytes);
        std::memcpy(buf.data() + at, t.data.data(), bytes);
    }
    detail::write_atomic(path, buf);
}

inline std::vector<NamedTensor> load_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "SLTNSR01", 8) != 0)
        throw std::runtime_error("checkpoint: not a tensor container: " + path);
    auto read_u64 = [&]() {
        uint64_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    const uint64_t count = read_u64();
    if (!is) throw std::runtime_error("checkpoint: truncated tensor container: " + path);
    std::vector<NamedTensor> tensors;
    for (uint64_t i = 0; i < count; ++i) {
        NamedTensor t;
        const uint64_t name_len = read_u64();
        if (!is || name_len > (1u << 20))
            throw std::runtime_error("checkpoint: malformed tensor name in " + path);
        t.name.resize(name_len);
        is.read(t.name.data(), std::streamsize(name_len));
        const uint64_t rank = read_u64();
        if (!is || rank > 16)
            throw std::runtime_error("checkpoint: malformed tensor rank in " + path);
        uint64_t total = 1;
        for (uint64_t r = 0; r < rank; ++r) {
            t.dims.push_back(read_u64());
            total *= t.dims.back();
        }
        if (!is || total > (1ull << 32))
            throw std::runtime_error("checkpoint: malformed tensor dims in " + path);
        t.data.resize(total);
        is.read(reinterpret_cast<char*>(t.data.data()), std::streamsize(total * 8));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor data in " + path);
        tensors.push_back(std::move(t));
    }
    return tensors;
}

inline const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors,
                                      const std::string& name) {
    for (const NamedTensor& t : tensors)
        if (t.name == name) return t;
    throw std::runtime_error("checkpoint: missing tensor: " + name);
}

}  // namespace splatlight
