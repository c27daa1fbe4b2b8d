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

#include <cmath>
#include <vector>

#include "splatlight/appearance.hpp"

using namespace splatlight;

namespace {

std::vector<double> random_embedding(Rng& rng, double half_range = 0.5) {
    std::vector<double> e(kEmbeddingDim);
    for (double& v : e) v = rng.uniform(-half_range, half_range);
    return e;
}

// Loads the heads with nonzero weights so Jacobians are nontrivial.
void randomize_heads(AppearanceMlp& mlp, Rng& rng) {
    for (double& w : mlp.sky_head.w) w = 0.05 * rng.normal();
    for (double& w : mlp.light_head.w) w = 0.05 * rng.normal();
}

struct Upstream {
    ShCoeffs d_light = ShCoeffs::zeros(kLightShDegree);
    ShCoeffs d_sky = ShCoeffs::zeros(kSkyShDegree);
};

Upstream random_upstream(Rng& rng) {
    Upstream u;
    for (Vec3& c : u.d_light.c)
        c = Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (Vec3& c : u.d_sky.c)
        c = Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return u;
}

double directional_value(const AppearanceMlp& mlp, const std::vector<double>& e,
                         const Upstream& u) {
    const AppearanceOutput out = appearance_forward(mlp, e);
    double v = 0.0;
    for (size_t j = 0; j < out.light.c.size(); ++j) v += out.light.c[j].dot(u.d_light.c[j]);
    for (size_t j = 0; j < out.sky.c.size(); ++j) v += out.sky.c[j].dot(u.d_sky.c[j]);
    return v;
}

}  // namespace

TEST_CASE("a fresh network outputs its head biases: a gray light and sky") {
    const AppearanceMlp mlp = make_appearance_mlp(3);
    const std::vector<double> zero(kEmbeddingDim, 0.0);
    const AppearanceOutput out = appearance_forward(mlp, zero);

    REQUIRE(out.light.degree == kLightShDegree);
    REQUIRE(out.sky.degree == kSkyShDegree);
    CHECK(out.light.c[0].x == Catch::Approx(initial_gray_dc()).margin(1e-12));
    for (size_t j = 1; j < out.light.c.size(); ++j) CHECK(out.light.c[j].norm() == 0.0);
    CHECK(out.sky.c[0].y == Catch::Approx(initial_gray_dc()).margin(1e-12));
    for (size_t j = 1; j < out.sky.c.size(); ++j) CHECK(out.sky.c[j].norm() == 0.0);

    // The DC-only gray evaluates to radiance 0.5 in every direction.
    Rng rng(5);
    for (int k = 0; k < 8; ++k) {
        const Vec3 dir = rng.uniform_sphere();
        const Vec3 radiance = eval_sh(out.light, dir);
        CHECK(radiance.x == Catch::Approx(0.5).margin(1e-12));
        CHECK(radiance.z == Catch::Approx(0.5).margin(1e-12));
    }

    // Nonzero embeddings still hit only the (zero) head weights at init.
    const AppearanceOutput out2 = appearance_forward(mlp, random_embedding(rng));
    CHECK(out2.light.c[0].x == Catch::Approx(initial_gray_dc()).margin(1e-12));
    for (size_t j = 1; j < out2.light.c.size(); ++j) CHECK(out2.light.c[j].norm() == 0.0);
}

TEST_CASE("output shapes are 3x25 light and 3x4 sky for any input") {
    AppearanceMlp mlp = make_appearance_mlp(11);
    Rng rng(12);
    randomize_heads(mlp, rng);
    for (int k = 0; k < 4; ++k) {
        const AppearanceOutput out = appearance_forward(mlp, random_embedding(rng));
        CHECK(out.light.degree == 4);
        CHECK(out.light.c.size() == 25);
        CHECK(out.sky.degree == 1);
        CHECK(out.sky.c.size() == 4);
        CHECK(out.light.all_finite());
        CHECK(out.sky.all_finite());
    }
}

TEST_CASE("dimension and shape violations are rejected") {
    const AppearanceMlp mlp = make_appearance_mlp(1);
    CHECK_THROWS_AS(appearance_forward(mlp, std::vector<double>(64, 0.0)),
                    std::invalid_argument);
    AppearanceMlp broken = make_appearance_mlp(1);
    broken.trunk2.resize(100, 100);
    CHECK_THROWS_AS(appearance_forward(broken, std::vector<double>(kEmbeddingDim, 0.0)),
                    std::invalid_argument);
    AppearanceCache empty_cache;
    CHECK_THROWS_AS(appearance_backward(mlp, empty_cache, ShCoeffs::zeros(4), ShCoeffs::zeros(1)),
                    std::invalid_argument);
}

TEST_CASE("the embedding gradient matches finite differences") {
    AppearanceMlp mlp = make_appearance_mlp(21);
    Rng rng(22);
    randomize_heads(mlp, rng);
    std::vector<double> e = random_embedding(rng);
    const Upstream u = random_upstream(rng);

    AppearanceCache cache;
    appearance_forward(mlp, e, &cache);
    const std::vector<double> d_e = appearance_backward(mlp, cache, u.d_light, u.d_sky);

    const double h = 1e-5;
    int mismatches = 0;
    for (int i = 0; i < kEmbeddingDim; ++i) {
        const double saved = e[i];
        e[i] = saved + h;
        const double vp = directional_value(mlp, e, u);
        e[i] = saved - h;
        const double vm = directional_value(mlp, e, u);
        e[i] = saved;
        const double fd = (vp - vm) / (2 * h);
        const double err = std::abs(d_e[i] - fd);
        if (!(err <= 1e-8 || err <= 1e-4 * std::max(std::abs(fd), std::abs(d_e[i]))))
            ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("weight gradients match finite differences on a toy table") {
    AppearanceMlp mlp = make_appearance_mlp(31);
    Rng rng(32);
    randomize_heads(mlp, rng);
    EmbeddingTable table = make_embedding_table(4, 33);
    for (auto& row : table.rows)
        for (double& v : row) v = rng.uniform(-0.5, 0.5);
    std::vector<Upstream> ups;
    for (int i = 0; i < 4; ++i) ups.push_back(random_upstream(rng));

    auto total_loss = [&](const AppearanceMlp& m) {
        double L = 0.0;
        for (size_t i = 0; i < table.size(); ++i) L += directional_value(m, table.row(i), ups[i]);
        return L;
    };

    AppearanceGrads grads = zero_grads_like(mlp);
    std::vector<std::vector<double>> d_rows;
    for (size_t i = 0; i < table.size(); ++i) {
        AppearanceCache cache;
        appearance_forward(mlp, table.row(i), &cache);
        d_rows.push_back(appearance_backward(mlp, cache, ups[i].d_light, ups[i].d_sky, &grads));
    }

    struct TensorRef {
        DenseLayer AppearanceMlp::*layer;
        DenseLayer AppearanceGrads::*grad;
        bool bias;
    };
    const std::vector<TensorRef> tensors = {
        {&AppearanceMlp::trunk1, &AppearanceGrads::trunk1, false},
        {&AppearanceMlp::trunk2, &AppearanceGrads::trunk2, false},
        {&AppearanceMlp::trunk3, &AppearanceGrads::trunk3, false},
        {&AppearanceMlp::sky_head, &AppearanceGrads::sky_head, false},
        {&AppearanceMlp::light_dense, &AppearanceGrads::light_dense, false},
        {&AppearanceMlp::light_head, &AppearanceGrads::light_head, false},
        {&AppearanceMlp::trunk1, &AppearanceGrads::trunk1, true},
        {&AppearanceMlp::trunk3, &AppearanceGrads::trunk3, true},
        {&AppearanceMlp::sky_head, &AppearanceGrads::sky_head, true},
        {&AppearanceMlp::light_head, &AppearanceGrads::light_head, true},
    };

    const double h = 1e-5;
    int mismatches = 0, checked = 0;
    for (const TensorRef& t : tensors) {
        std::vector<double>& vec = t.bias ? (mlp.*(t.layer)).b : (mlp.*(t.layer)).w;
        const std::vector<double>& gvec = t.bias ? (grads.*(t.grad)).b : (grads.*(t.grad)).w;
        for (int k = 0; k < 12; ++k) {
            const size_t idx = rng.uniform_index(vec.size());
            const double saved = vec[idx];
            vec[idx] = saved + h;
            const double lp = total_loss(mlp);
            vec[idx] = saved - h;
            const double lm = total_loss(mlp);
            vec[idx] = saved;
            const double fd = (lp - lm) / (2 * h);
            const double an = gvec[idx];
            const double err = std::abs(an - fd);
            if (!(err <= 1e-7 || err <= 1e-4 * std::max(std::abs(fd), std::abs(an))))
                ++mismatches;
            ++checked;
        }
    }
    CHECK(checked == 120);
    CHECK(mismatches == 0);

    // Per-row embedding gradients also check out by finite differences.
    for (size_t i = 0; i < table.size(); ++i) {
        for (int k = 0; k < 8; ++k) {
            const size_t idx = rng.uniform_index(size_t(kEmbeddingDim));
            double& v = table.row(i)[idx];
            const double saved = v;
            v = saved + h;
            const double lp = total_loss(mlp);
            v = saved - h;
            const double lm = total_loss(mlp);
            v = saved;
            const double fd = (lp - lm) / (2 * h);
            const double an = d_rows[i][idx];
            const double err = std::abs(an - fd);
            CHECK((err <= 1e-7 || err <= 1e-4 * std::max(std::abs(fd), std::abs(an))));
        }
    }
}

TEST_CASE("zero upstream gradients yield zero parameter gradients") {
    AppearanceMlp mlp = make_appearance_mlp(41);
    Rng rng(42);
    randomize_heads(mlp, rng);
    AppearanceCache cache;
    appearance_forward(mlp, random_embedding(rng), &cache);
    AppearanceGrads grads = zero_grads_like(mlp);
    const std::vector<double> d_e =
        appearance_backward(mlp, cache, ShCoeffs::zeros(4), ShCoeffs::zeros(1), &grads);
    for (double v : d_e) CHECK(v == 0.0);
    for (double v : grads.trunk1.w) REQUIRE(v == 0.0);
    for (double v : grads.light_head.w) REQUIRE(v == 0.0);
    for (double v : grads.sky_head.b) REQUIRE(v == 0.0);
}

TEST_CASE("images touch only their own embedding rows") {
    AppearanceMlp mlp = make_appearance_mlp(51);
    Rng rng(52);
    randomize_heads(mlp, rng);
    EmbeddingTable table = make_embedding_table(3, 53);
    // Emulate one training step that uses image 1 only.
    std::vector<std::vector<double>> table_grads(table.size(),
                                                 std::vector<double>(kEmbeddingDim, 0.0));
    AppearanceCache cache;
    appearance_forward(mlp, table.row(1), &cache);
    const Upstream u = random_upstream(rng);
    table_grads[1] = appearance_backward(mlp, cache, u.d_light, u.d_sky);

    double row1_norm = 0.0;
    for (double v : table_grads[1]) row1_norm += v * v;
    CHECK(row1_norm > 0.0);
    for (size_t i : {size_t(0), size_t(2)})
        for (double v : table_grads[i]) REQUIRE(v == 0.0);
}

TEST_CASE("initialization is reproducible and seed-sensitive") {
    const AppearanceMlp a = make_appearance_mlp(7);
    const AppearanceMlp b = make_appearance_mlp(7);
    const AppearanceMlp c = make_appearance_mlp(8);
    REQUIRE(a.trunk1.w == b.trunk1.w);
    REQUIRE(a.trunk3.w == b.trunk3.w);
    CHECK(a.trunk1.w != c.trunk1.w);

    const EmbeddingTable t1 = make_embedding_table(5, 9);
    const EmbeddingTable t2 = make_embedding_table(5, 9);
    REQUIRE(t1.rows == t2.rows);
    CHECK(t1.size() == 5);

    // Rows follow the small-scale normal initialization.
    double mean = 0.0, var = 0.0;
    size_t n = 0;
    for (const auto& r : t1.rows)
        for (double v : r) {
            mean += v;
            ++n;
        }
    mean /= double(n);
    for (const auto& r : t1.rows)
        for (double v : r) var += (v - mean) * (v - mean);
    var /= double(n - 1);
    CHECK(std::abs(mean) < 0.005);
    CHECK(std::sqrt(var) > 0.005);
    CHECK(std::sqrt(var) < 0.02);
}
