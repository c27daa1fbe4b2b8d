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

#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "sh.hpp"

namespace splatlight {

inline constexpr int kEmbeddingDim = 128;
inline constexpr int kTrunkWidth = 256;
inline constexpr int kLightBranchWidth = 128;
inline constexpr int kSkyShDegree = 1;
inline constexpr int kLightShDegree = 4;

// Initial environment light and sky color: a uniform gray of radiance 0.5,
// expressed as a pure DC spherical-harmonic coefficient.
inline double initial_gray_dc() { return 0.5 / 0.28209479177387814; }

struct DenseLayer {
    int in_dim = 0, out_dim = 0;
    std::vector<double> w;  // row-major: w[o * in_dim + i]
    std::vector<double> b;

    void resize(int in, int out) {
        in_dim = in;
        out_dim = out;
        w.assign(size_t(in) * out, 0.0);
        b.assign(out, 0.0);
    }

    void forward(const double* x, double* y) const {
        for (int o = 0; o < out_dim; ++o) {
            double acc = b[o];
            const double* row = &w[size_t(o) * in_dim];
            for (int i = 0; i < in_dim; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
    }

    // Accumulates weight/bias gradients and writes the input gradient.
    void backward(const double* x, const double* d_y, DenseLayer* d_layer, double* d_x) const {
        if (d_x)
            for (int i = 0; i < in_dim; ++i) d_x[i] = 0.0;
        for (int o = 0; o < out_dim; ++o) {
            const double g = d_y[o];
            const double* row = &w[size_t(o) * in_dim];
            if (d_layer) {
                d_layer->b[o] += g;
                double* d_row = &d_layer->w[size_t(o) * in_dim];
                for (int i = 0; i < in_dim; ++i) d_row[i] += g * x[i];
            }
            if (d_x && g != 0.0)
                for (int i = 0; i < in_dim; ++i) d_x[i] += g * row[i];
        }
    }
};

// Trunk of three 256-unit rectified-linear layers; a direct sky head (3x4
// coefficients) and a 128-unit light branch feeding the light head (3x25).
struct AppearanceMlp {
    DenseLayer trunk1, trunk2, trunk3;
    DenseLayer sky_head;
    DenseLayer light_dense, light_head;

    void check_shapes() const {
        auto expect = [](const DenseLayer& l, int in, int out, const char* name) {
            if (l.in_dim != in || l.out_dim != out || l.w.size() != size_t(in) * out ||
                l.b.size() != size_t(out))
                throw std::invalid_argument(std::string("appearance: bad layer shape: ") + name);
        };
        expect(trunk1, kEmbeddingDim, kTrunkWidth, "trunk1");
        expect(trunk2, kTrunkWidth, kTrunkWidth, "trunk2");
        expect(trunk3, kTrunkWidth, kTrunkWidth, "trunk3");
        expect(sky_head, kTrunkWidth, 3 * sh_coeff_count(kSkyShDegree), "sky_head");
        expect(light_dense, kTrunkWidth, kLightBranchWidth, "light_dense");
        expect(light_head, kLightBranchWidth, 3 * sh_coeff_count(kLightShDegree), "light_head");
    }
};

namespace detail {

inline void fill_normal(std::vector<double>& v, double stddev, Rng& rng) {
    for (double& x : v) x = stddev * rng.normal();
}

}  // namespace detail

// He-style initialization for the rectified-linear layers; both heads start
// with zero weights so the initial outputs are exactly their biases: a DC-only
// gray light and a mid-gray sky.
inline AppearanceMlp make_appearance_mlp(uint64_t seed) {
    AppearanceMlp mlp;
    Rng rng(mix_seed(seed, 0x6d6c70u));
    mlp.trunk1.resize(kEmbeddingDim, kTrunkWidth);
    mlp.trunk2.resize(kTrunkWidth, kTrunkWidth);
    mlp.trunk3.resize(kTrunkWidth, kTrunkWidth);
    mlp.sky_head.resize(kTrunkWidth, 3 * sh_coeff_count(kSkyShDegree));
    mlp.light_dense.resize(kTrunkWidth, kLightBranchWidth);
    mlp.light_head.resize(kLightBranchWidth, 3 * sh_coeff_count(kLightShDegree));

    detail::fill_normal(mlp.trunk1.w, std::sqrt(2.0 / kEmbeddingDim), rng);
    detail::fill_normal(mlp.trunk2.w, std::sqrt(2.0 / kTrunkWidth), rng);
    detail::fill_normal(mlp.trunk3.w, std::sqrt(2.0 / kTrunkWidth), rng);
    detail::fill_normal(mlp.light_dense.w, std::sqrt(2.0 / kTrunkWidth), rng);

    for (int c = 0; c < 3; ++c) {
        mlp.light_head.b[c] = initial_gray_dc();  // coefficient j=0, channel c
        mlp.sky_head.b[c] = initial_gray_dc();
    }
    return mlp;
}

struct EmbeddingTable {
    std::vector<std::vector<double>> rows;

    size_t size() const { return rows.size(); }
    std::vector<double>& row(size_t i) { return rows.at(i); }
    const std::vector<double>& row(size_t i) const { return rows.at(i); }
};

inline EmbeddingTable make_embedding_table(size_t image_count, uint64_t seed) {
    EmbeddingTable table;
    table.rows.assign(image_count, std::vector<double>(kEmbeddingDim, 0.0));
    Rng rng(mix_seed(seed, 0x656d62u));
    for (auto& r : table.rows)
        for (double& v : r) v = 0.01 * rng.normal();
    return table;
}

struct AppearanceOutput {
    ShCoeffs light;  // degree 4
    ShCoeffs sky;    // degree 1
};

// Post-activation values retained for backward.
struct AppearanceCache {
    std::vector<double> input, h1, h2, h3, hl;
};

namespace detail {

inline void relu_inplace(std::vector<double>& v) {
    for (double& x : v)
        if (x < 0.0) x = 0.0;
}

// The head output vector packs coefficient j of channel c at index 3*j + c.
inline ShCoeffs head_to_sh(const std::vector<double>& o, int degree) {
    ShCoeffs sh = ShCoeffs::zeros(degree);
    for (int j = 0; j < sh.count(); ++j)
        sh.c[j] = Vec3{o[size_t(3) * j], o[size_t(3) * j + 1], o[size_t(3) * j + 2]};
    return sh;
}

inline std::vector<double> sh_to_head_grad(const ShCoeffs& d_sh, int degree) {
    const int n = sh_coeff_count(degree);
    std::vector<double> g(size_t(3) * n, 0.0);
    const int m = std::min<int>(n, d_sh.c.empty() ? 0 : int(d_sh.c.size()));
    for (int j = 0; j < m; ++j) {
        g[size_t(3) * j] = d_sh.c[j].x;
        g[size_t(3) * j + 1] = d_sh.c[j].y;
        g[size_t(3) * j + 2] = d_sh.c[j].z;
    }
    return g;
}

}  // namespace detail

inline AppearanceOutput appearance_forward(const AppearanceMlp& mlp,
                                           const std::vector<double>& embedding,
                                           AppearanceCache* cache = nullptr) {
    mlp.check_shapes();
    if (int(embedding.size()) != kEmbeddingDim)
        throw std::invalid_argument("appearance: embedding must have dimension 128");

    std::vector<double> h1(kTrunkWidth), h2(kTrunkWidth), h3(kTrunkWidth);
    mlp.trunk1.forward(embedding.data(), h1.data());
    detail::relu_inplace(h1);
    mlp.trunk2.forward(h1.data(), h2.data());
    detail::relu_inplace(h2);
    mlp.trunk3.forward(h2.data(), h3.data());
    detail::relu_inplace(h3);

    std::vector<double> sky_out(mlp.sky_head.out_dim);
    mlp.sky_head.forward(h3.data(), sky_out.data());

    std::vector<double> hl(kLightBranchWidth);
    mlp.light_dense.forward(h3.data(), hl.data());
    detail::relu_inplace(hl);
    std::vector<double> light_out(mlp.light_head.out_dim);
    mlp.light_head.forward(hl.data(), light_out.data());

    if (cache) {
        cache->input = embedding;
        cache->h1 = h1;
        cache->h2 = h2;
        cache->h3 = h3;
        cache->hl = hl;
    }

    AppearanceOutput out;
    out.light = detail::head_to_sh(light_out, kLightShDegree);
    out.sky = detail::head_to_sh(sky_out, kSkyShDegree);
    return out;
}

// Gradient holder sharing the layer geometry of AppearanceMlp.
struct AppearanceGrads {
    DenseLayer trunk1, trunk2, trunk3;
    DenseLayer sky_head;
    DenseLayer light_dense, light_head;
};

inline AppearanceGrads zero_grads_like(const AppearanceMlp& mlp) {
    AppearanceGrads g;
    g.trunk1.resize(mlp.trunk1.in_dim, mlp.trunk1.out_dim);
    g.trunk2.resize(mlp.trunk2.in_dim, mlp.trunk2.out_dim);
    g.trunk3.resize(mlp.trunk3.in_dim, mlp.trunk3.out_dim);
    g.sky_head.resize(mlp.sky_head.in_dim, mlp.sky_head.out_dim);
    g.light_dense.resize(mlp.light_dense.in_dim, mlp.light_dense.out_dim);
    g.light_head.resize(mlp.light_head.in_dim, mlp.light_head.out_dim);
    return g;
}

// Backpropagates light/sky coefficient gradients through the network,
// accumulating into `accum` (may be null to skip weight gradients), and
// returns the gradient w.r.t. the embedding row.
inline std::vector<double> appearance_backward(const AppearanceMlp& mlp,
                                               const AppearanceCache& cache,
                                               const ShCoeffs& d_light, const ShCoeffs& d_sky,
                                               AppearanceGrads* accum = nullptr) {
    mlp.check_shapes();
    if (int(cache.input.size()) != kEmbeddingDim || int(cache.h3.size()) != kTrunkWidth ||
        int(cache.hl.size()) != kLightBranchWidth)
        throw std::invalid_argument("appearance: backward requires a forward cache");

    const std::vector<double> d_light_out = detail::sh_to_head_grad(d_light, kLightShDegree);
    const std::vector<double> d_sky_out = detail::sh_to_head_grad(d_sky, kSkyShDegree);

    std::vector<double> d_hl(kLightBranchWidth, 0.0);
    mlp.light_head.backward(cache.hl.data(), d_light_out.data(),
                            accum ? &accum->light_head : nullptr, d_hl.data());
    for (int i = 0; i < kLightBranchWidth; ++i)
        if (cache.hl[i] <= 0.0) d_hl[i] = 0.0;

    std::vector<double> d_h3_light(kTrunkWidth, 0.0);
    mlp.light_dense.backward(cache.h3.data(), d_hl.data(),
                             accum ? &accum->light_dense : nullptr, d_h3_light.data());
    std::vector<double> d_h3_sky(kTrunkWidth, 0.0);
    mlp.sky_head.backward(cache.h3.data(), d_sky_out.data(),
                          accum ? &accum->sky_head : nullptr, d_h3_sky.data());

    std::vector<double> d_h3(kTrunkWidth);
    for (int i = 0; i < kTrunkWidth; ++i)
        d_h3[i] = cache.h3[i] > 0.0 ? d_h3_light[i] + d_h3_sky[i] : 0.0;

    std::vector<double> d_h2(kTrunkWidth, 0.0);
    mlp.trunk3.backward(cache.h2.data(), d_h3.data(), accum ? &accum->trunk3 : nullptr,
                        d_h2.data());
    for (int i = 0; i < kTrunkWidth; ++i)
        if (cache.h2[i] <= 0.0) d_h2[i] = 0.0;

    std::vector<double> d_h1(kTrunkWidth, 0.0);
    mlp.trunk2.backward(cache.h1.data(), d_h2.data(), accum ? &accum->trunk2 : nullptr,
                        d_h1.data());
    for (int i = 0; i < kTrunkWidth; ++i)
        if (cache.h1[i] <= 0.0) d_h1[i] = 0.0;

    std::vector<double> d_embedding(kEmbeddingDim, 0.0);
    mlp.trunk1.backward(cache.input.data(), d_h1.data(), accum ? &accum->trunk1 : nullptr,
                        d_embedding.data());
    return d_embedding;
}

}  // namespace splatlight
