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

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"

namespace splatlight {

struct ImageRGB {
    int width = 0, height = 0;
    std::vector<Vec3> px;  // row-major, top-down

    ImageRGB() = default;
    ImageRGB(int w, int h) : width(w), height(h), px(size_t(w) * h) {}

    Vec3& at(int x, int y) { return px[size_t(y) * width + x]; }
    const Vec3& at(int x, int y) const { return px[size_t(y) * width + x]; }
};

struct ImageGray {
    int width = 0, height = 0;
    std::vector<double> px;

    ImageGray() = default;
    ImageGray(int w, int h) : width(w), height(h), px(size_t(w) * h, 0.0) {}

    double& at(int x, int y) { return px[size_t(y) * width + x]; }
    double at(int x, int y) const { return px[size_t(y) * width + x]; }
};

// ---------------------------------------------------------------------------
// PNG, 8-bit. Values are stored verbatim in display space: writing quantizes
// clamp01(v) to a byte, reading maps bytes back to [0,1].
// ---------------------------------------------------------------------------

inline void save_png(const ImageRGB& img, const std::string& path) {
    if (img.width <= 0 || img.height <= 0)
        throw std::invalid_argument("png: empty image");
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("png: cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("png: write failed: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(size_t(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Vec3& v = img.at(x, y);
            for (int c = 0; c < 3; ++c)
                row[size_t(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(clamp01(v[c]) * 255.0));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline ImageRGB load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("png: cannot open: " + path);
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp) != 8 || png_sig_cmp(sig, 0, 8)) {
        std::fclose(fp);
        throw std::runtime_error("png: not a png file: " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw std::runtime_error("png: read failed: " + path);
    }
    png_init_io(png, fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    ImageRGB img(int(png_get_image_width(png, info)), int(png_get_image_height(png, info)));
    std::vector<unsigned char> row(png_get_rowbytes(png, info));
    for (int y = 0; y < img.height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < img.width; ++x)
            img.at(x, y) = Vec3{row[size_t(x) * 3] / 255.0, row[size_t(x) * 3 + 1] / 255.0,
                                row[size_t(x) * 3 + 2] / 255.0};
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

// ---------------------------------------------------------------------------
// PFM, 32-bit float. "Pf" = grayscale, "PF" = rgb; the scale line's sign
// encodes endianness (negative = little endian); rows run bottom-up.
// ---------------------------------------------------------------------------

inline void save_pfm(const ImageGray& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("pfm: cannot open for writing: " + path);
    os << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x) {
            float f = static_cast<float>(img.at(x, y));
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            unsigned char b[4] = {static_cast<unsigned char>(bits),
                                  static_cast<unsigned char>(bits >> 8),
                                  static_cast<unsigned char>(bits >> 16),
                                  static_cast<unsigned char>(bits >> 24)};
            os.write(reinterpret_cast<const char*>(b), 4);
        }
    if (!os) throw std::runtime_error("pfm: write failed: " + path);
}

inline ImageGray load_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("pfm: cannot open: " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0;
    is >> magic >> w >> h >> scale;
    if (magic != "Pf" || w <= 0 || h <= 0 || scale == 0 || !is)
        throw std::runtime_error("pfm: malformed header in " + path);
    is.get();  // single whitespace after the scale line
    const bool little = scale < 0;
    ImageGray img(w, h);
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x) {
            unsigned char b[4];
            is.read(reinterpret_cast<char*>(b), 4);
            uint32_t bits = little ? (uint32_t(b[0]) | uint32_t(b[1]) << 8 |
                                      uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24)
                                   : (uint32_t(b[3]) | uint32_t(b[2]) << 8 |
                                      uint32_t(b[1]) << 16 | uint32_t(b[0]) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            img.at(x, y) = f;
        }
    if (!is) throw std::runtime_error("pfm: truncated data in " + path);
    return img;
}

inline void save_pfm_rgb(const ImageRGB& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("pfm: cannot open for writing: " + path);
    os << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                float f = static_cast<float>(img.at(x, y)[c]);
                uint32_t bits;
                std::memcpy(&bits, &f, 4);
                unsigned char b[4] = {static_cast<unsigned char>(bits),
                                      static_cast<unsigned char>(bits >> 8),
                                      static_cast<unsigned char>(bits >> 16),
                                      static_cast<unsigned char>(bits >> 24)};
                os.write(reinterpret_cast<const char*>(b), 4);
            }
    if (!os) throw std::runtime_error("pfm: write failed: " + path);
}

inline ImageRGB load_pfm_rgb(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("pfm: cannot open: " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0;
    is >> magic >> w >> h >> scale;
    if (magic != "PF" || w <= 0 || h <= 0 || scale == 0 || !is)
        throw std::runtime_error("pfm: malformed header in " + path);
    is.get();
    const bool little = scale < 0;
    ImageRGB img(w, h);
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                unsigned char b[4];
                is.read(reinterpret_cast<char*>(b), 4);
                uint32_t bits = little ? (uint32_t(b[0]) | uint32_t(b[1]) << 8 |
                                          uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24)
                                       : (uint32_t(b[3]) | uint32_t(b[2]) << 8 |
                                          uint32_t(b[1]) << 16 | uint32_t(b[0]) << 24);
                float f;
                std::memcpy(&f, &bits, 4);
                img.at(x, y)[c] = f;
            }
    if (!is) throw std::runtime_error("pfm: truncated data in " + path);
    return img;
}

}  // namespace splatlight
