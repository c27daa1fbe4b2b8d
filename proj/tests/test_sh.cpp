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

#include <splatlight/sh.hpp>

#include <sstream>

#include "oracles.hpp"

using namespace splatlight;

namespace {

ShCoeffs random_sh(int degree, uint64_t seed) {
    Rng rng(seed);
    ShCoeffs sh = ShCoeffs::zeros(degree);
    for (auto& v : sh.c) v = {rng.normal(), rng.normal(), rng.normal()};
    return sh;
}

// Equirectangular midpoint-rule sample set; weights tile the sphere.
std::vector<ShSample> grid_samples(const std::function<Vec3(const Vec3&)>& f, int rows,
                                   int cols) {
    std::vector<ShSample> out;
    out.reserve(size_t(rows) * cols);
    for (int i = 0; i < rows; ++i) {
        double theta = (i + 0.5) * kPi / rows;
        double w = std::sin(theta) * (kPi / rows) * (2.0 * kPi / cols);
        for (int j = 0; j < cols; ++j) {
            double phi = (j + 0.5) * 2.0 * kPi / cols;
            ShSample s;
            s.dir = {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                     std::cos(theta)};
            s.value = f(s.dir);
            s.weight = w;
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("degree-0 basis is the constant 1/(2 sqrt pi)") {
    double b[1];
    eval_sh_basis(Vec3{0, 0, 1}, 0, b);
    REQUIRE(b[0] == Catch::Approx(0.2820948).margin(1e-7));
    eval_sh_basis(Vec3{1, 0, 0}, 0, b);
    REQUIRE(b[0] == Catch::Approx(0.28209479177387814).margin(0.0));
}

TEST_CASE("band-1 basis at +z") {
    double b[4];
    eval_sh_basis(Vec3{0, 0, 1}, 1, b);
    REQUIRE(b[1] == Catch::Approx(0.0).margin(0.0));
    REQUIRE(b[2] == Catch::Approx(0.4886025).margin(1e-7));
    REQUIRE(b[3] == Catch::Approx(0.0).margin(0.0));
}

TEST_CASE("full degree-4 basis matches the recurrence oracle") {
    Rng rng(21);
    std::vector<Vec3> dirs = {Vec3{1, 1, 1}.normalized()};
    for (int i = 0; i < 200; ++i) dirs.push_back(rng.uniform_sphere());
    for (const Vec3& d : dirs) {
        double b[25];
        eval_sh_basis(d, 4, b);
        for (int j = 0; j < 25; ++j)
            REQUIRE(b[j] == Catch::Approx(oracles::real_sh_index(j, d)).margin(1e-12));
    }
}

TEST_CASE("basis rejects bad inputs") {
    double b[25];
    REQUIRE_THROWS_AS(eval_sh_basis(Vec3{1, 1, 1}, 2, b), std::invalid_argument);
    REQUIRE_THROWS_AS(eval_sh_basis(Vec3{0, 0, 1}, 5, b), std::invalid_argument);
    REQUIRE_THROWS_AS(eval_sh_basis(Vec3{0, 0, 1}, -1, b), std::invalid_argument);
}

TEST_CASE("basis gradients match finite differences along sphere tangents") {
    // Every consumer normalizes before evaluating, so only the tangential
    // part of the free-polynomial gradient is observable; check it against
    // great-circle finite differences.
    Rng rng(31);
    const double eps = 1e-6;
    for (int trial = 0; trial < 30; ++trial) {
        Vec3 d = rng.uniform_sphere();
        Vec3 t = rng.uniform_sphere();
        t = (t - d * d.dot(t)).normalized();
        double val[25];
        Vec3 grad[25];
        eval_sh_basis_grad(d, 4, val, grad);
        double bp[25], bm[25];
        eval_sh_basis((d + t * eps).normalized(), 4, bp);
        eval_sh_basis((d - t * eps).normalized(), 4, bm);
        for (int j = 0; j < 25; ++j) {
            double fd = (bp[j] - bm[j]) / (2 * eps);
            Vec3 tangential = grad[j] - d * d.dot(grad[j]);
            REQUIRE(tangential.dot(t) == Catch::Approx(fd).margin(1e-6));
        }
    }
}

TEST_CASE("orthonormality up to degree 4 under Monte-Carlo quadrature") {
    const int n = 1000000;
    Rng rng(8);
    std::vector<std::array<double, 25>> basis(n);
    for (int i = 0; i < n; ++i) {
        Vec3 d = rng.uniform_sphere();
        eval_sh_basis(d, 4, basis[i].data());
    }
    const double w = 4.0 * kPi / n;
    for (int a = 0; a < 25; ++a) {
        for (int b = a; b < 25; ++b) {
            double dot = 0;
            for (int i = 0; i < n; ++i) dot += basis[i][a] * basis[i][b];
            dot *= w;
            double expect = a == b ? 1.0 : 0.0;
            REQUIRE(dot == Catch::Approx(expect).margin(5e-3));
        }
    }
}

TEST_CASE("projection of a constant recovers only the DC term") {
    auto samples = grid_samples([](const Vec3&) { return Vec3{1, 1, 1}; }, 512, 1024);
    ShCoeffs sh = project_to_sh(samples, 4);
    REQUIRE(sh.c[0].x == Catch::Approx(2.0 * std::sqrt(kPi)).margin(1e-4));
    REQUIRE(sh.c[0].x == Catch::Approx(3.5449).margin(1e-3));
    for (int j = 1; j < 25; ++j)
        for (int ch = 0; ch < 3; ++ch) REQUIRE(std::fabs(sh.c[j][ch]) < 1e-3);
}

TEST_CASE("projection of a basis function is a unit vector of coefficients") {
    auto samples = grid_samples(
        [](const Vec3& d) {
            double b[4];
            eval_sh_basis(d, 1, b);
            return Vec3{b[2], b[2], b[2]};  // Y_1^0
        },
        512, 1024);
    ShCoeffs sh = project_to_sh(samples, 2);
    for (int j = 0; j < 9; ++j) {
        double expect = j == 2 ? 1.0 : 0.0;
        REQUIRE(sh.c[j].x == Catch::Approx(expect).margin(1e-3));
    }
}

TEST_CASE("project then eval is identity on band-limited functions") {
    ShCoeffs truth = random_sh(3, 17);
    auto samples = grid_samples([&](const Vec3& d) { return eval_sh(truth, d); }, 512, 1024);
    ShCoeffs fitted = project_to_sh(samples, 3);
    for (int j = 0; j < truth.count(); ++j)
        for (int ch = 0; ch < 3; ++ch)
            REQUIRE(fitted.c[j][ch] == Catch::Approx(truth.c[j][ch]).margin(1e-3));
}

TEST_CASE("eval_sh of a DC-only light is constant") {
    ShCoeffs sh = ShCoeffs::zeros(4);
    sh.c[0] = Vec3{1, 1, 1} * (2.0 * std::sqrt(kPi));
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        Vec3 v = eval_sh(sh, rng.uniform_sphere());
        REQUIRE(v.x == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(v.y == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(v.z == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("eval_sh matches direct basis expansion to 1e-10") {
    ShCoeffs sh = random_sh(4, 23);
    Rng rng(29);
    for (int i = 0; i < 100; ++i) {
        Vec3 d = rng.uniform_sphere();
        Vec3 got = eval_sh(sh, d);
        Vec3 expect{0, 0, 0};
        for (int j = 0; j < 25; ++j) expect += sh.c[j] * oracles::real_sh_index(j, d);
        REQUIRE(got.x == Catch::Approx(expect.x).margin(1e-10));
        REQUIRE(got.y == Catch::Approx(expect.y).margin(1e-10));
        REQUIRE(got.z == Catch::Approx(expect.z).margin(1e-10));
    }
}

TEST_CASE("eval_sh_backward matches finite differences") {
    ShCoeffs sh = random_sh(4, 41);
    Rng rng(43);
    const double eps = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        Vec3 d = rng.uniform_sphere();
        Vec3 up{rng.normal(), rng.normal(), rng.normal()};
        ShCoeffs d_sh = ShCoeffs::zeros(4);
        Vec3 d_dir = eval_sh_backward(sh, d, up, &d_sh);

        // coefficient gradients
        for (int j = 0; j < 25; ++j)
            for (int ch = 0; ch < 3; ++ch) {
                ShCoeffs p = sh, m = sh;
                p.c[j][ch] += eps;
                m.c[j][ch] -= eps;
                double fd = (up.dot(eval_sh(p, d)) - up.dot(eval_sh(m, d))) / (2 * eps);
                REQUIRE(d_sh.c[j][ch] == Catch::Approx(fd).margin(1e-6));
            }

        // direction gradient, chained through normalization so FD can stay
        // on the sphere
        Vec3 d_raw = normalize_backward(d, d_dir);
        for (int axis = 0; axis < 3; ++axis) {
            Vec3 dp = d, dm = d;
            dp[axis] += eps;
            dm[axis] -= eps;
            double fd = (up.dot(eval_sh(sh, dp.normalized())) -
                         up.dot(eval_sh(sh, dm.normalized()))) /
                        (2 * eps);
            REQUIRE(d_raw[axis] == Catch::Approx(fd).margin(1e-5));
        }
    }
}

TEST_CASE("blur with zero roughness is the identity") {
    ShCoeffs sh = random_sh(4, 51);
    ShCoeffs blurred = sh_gaussian_blur(sh, 0.0);
    for (int j = 0; j < 25; ++j)
        for (int ch = 0; ch < 3; ++ch) REQUIRE(blurred.c[j][ch] == sh.c[j][ch]);
}

TEST_CASE("blur leaves the DC coefficient unchanged") {
    ShCoeffs sh = random_sh(4, 53);
    for (double rough : {0.1, 0.5, 0.9, 1.0}) {
        ShCoeffs blurred = sh_gaussian_blur(sh, rough);
        REQUIRE(blurred.c[0].x == sh.c[0].x);
        REQUIRE(blurred.c[0].y == sh.c[0].y);
        REQUIRE(blurred.c[0].z == sh.c[0].z);
    }
}

TEST_CASE("blur band-2 multiplier at strength 0.5") {
    ShCoeffs sh = ShCoeffs::zeros(4);
    for (int j = 4; j < 9; ++j) sh.c[j] = {1, 1, 1};
    ShCoeffs blurred = sh_blur_with_strength(sh, 0.5);
    for (int j = 4; j < 9; ++j)
        REQUIRE(blurred.c[j].x == Catch::Approx(0.22313).margin(1e-5));
    REQUIRE(sh_blur_band_multiplier(2, 0.5) == Catch::Approx(std::exp(-1.5)).margin(0.0));
}

TEST_CASE("blur exponent switch selects the kernel argument") {
    ShCoeffs sh = random_sh(4, 57);
    double rough = 0.7;
    ShCoeffs quartic = sh_gaussian_blur(sh, rough, 2);
    ShCoeffs squared = sh_gaussian_blur(sh, rough, 1);
    // band 1: exponents -2 rho^4 vs -2 rho^2
    REQUIRE(quartic.c[1].x ==
            Catch::Approx(sh.c[1].x * std::exp(-2 * std::pow(rough, 4.0))).margin(1e-12));
    REQUIRE(squared.c[1].x ==
            Catch::Approx(sh.c[1].x * std::exp(-2 * rough * rough)).margin(1e-12));
}

TEST_CASE("blur composition law and linearity") {
    ShCoeffs sh = random_sh(4, 61);
    double a = 0.3, b = 0.45;
    ShCoeffs twice = sh_blur_with_strength(sh_blur_with_strength(sh, a), b);
    ShCoeffs once = sh_blur_with_strength(sh, std::sqrt(a * a + b * b));
    for (int j = 0; j < 25; ++j)
        REQUIRE(twice.c[j].x == Catch::Approx(once.c[j].x).margin(1e-12));

    // linearity
    ShCoeffs sh2 = random_sh(4, 63);
    ShCoeffs sum = sh;
    for (int j = 0; j < 25; ++j) sum.c[j] += sh2.c[j];
    ShCoeffs blurred_sum = sh_blur_with_strength(sum, a);
    for (int j = 0; j < 25; ++j) {
        double expect = sh_blur_with_strength(sh, a).c[j].x + sh_blur_with_strength(sh2, a).c[j].x;
        REQUIRE(blurred_sum.c[j].x == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("blur rejects roughness outside the unit interval") {
    ShCoeffs sh = random_sh(4, 67);
    REQUIRE_THROWS_AS(sh_gaussian_blur(sh, -0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(sh_gaussian_blur(sh, 1.1), std::invalid_argument);
}

TEST_CASE("irradiance of constant unit radiance is pi for every normal") {
    ShCoeffs light = ShCoeffs::zeros(2);
    light.c[0] = Vec3{1, 1, 1} * (2.0 * std::sqrt(kPi));
    IrradianceMatrix m = irradiance_matrix(light);
    Rng rng(71);
    for (int i = 0; i < 100; ++i) {
        Vec3 e = m.quadratic_form(rng.uniform_sphere());
        REQUIRE(e.x == Catch::Approx(kPi).margin(1e-12));
        REQUIRE(e.y == Catch::Approx(kPi).margin(1e-12));
        REQUIRE(e.z == Catch::Approx(kPi).margin(1e-12));
    }
}

TEST_CASE("irradiance matrix of zero light is zero") {
    IrradianceMatrix m = irradiance_matrix(ShCoeffs::zeros(2));
    for (int ch = 0; ch < 3; ++ch)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) REQUIRE(m.m[ch][i][j] == 0.0);
}

TEST_CASE("irradiance matrix is symmetric and linear in the light") {
    ShCoeffs a = random_sh(2, 73), b = random_sh(2, 79);
    IrradianceMatrix ma = irradiance_matrix(a), mb = irradiance_matrix(b);
    ShCoeffs sum = a;
    for (int j = 0; j < 9; ++j) sum.c[j] += b.c[j] * 2.0;
    IrradianceMatrix ms = irradiance_matrix(sum);
    for (int ch = 0; ch < 3; ++ch)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                REQUIRE(ma.m[ch][i][j] == Catch::Approx(ma.m[ch][j][i]).margin(1e-12));
                REQUIRE(ms.m[ch][i][j] ==
                        Catch::Approx(ma.m[ch][i][j] + 2.0 * mb.m[ch][i][j]).margin(1e-12));
            }
}

TEST_CASE("irradiance quadratic form matches the Monte-Carlo hemisphere integral") {
    ShCoeffs light = random_sh(2, 83);
    // keep the field mostly positive so relative error is meaningful
    light.c[0] += Vec3{8, 8, 8};
    IrradianceMatrix m = irradiance_matrix(light);
    Rng rng(89);
    for (int i = 0; i < 100; ++i) {
        Vec3 n = rng.uniform_sphere();
        Vec3 got = m.quadratic_form(n);
        Vec3 mc = oracles::mc_irradiance(
            [&](const Vec3& w) { return eval_sh(light, w); }, n, 1000000, 1000 + i);
        for (int ch = 0; ch < 3; ++ch)
            REQUIRE(got[ch] == Catch::Approx(mc[ch]).epsilon(0.005));
    }
}

TEST_CASE("irradiance quadratic form gradient matches finite differences") {
    ShCoeffs light = random_sh(2, 97);
    IrradianceMatrix m = irradiance_matrix(light);
    Rng rng(101);
    const double eps = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        Vec3 n = rng.uniform_sphere();
        for (int ch = 0; ch < 3; ++ch) {
            Vec3 g = m.quadratic_form_grad(n, ch);
            for (int axis = 0; axis < 3; ++axis) {
                Vec3 np = n, nm = n;
                np[axis] += eps;
                nm[axis] -= eps;
                double fd = (m.quadratic_form(np)[ch] - m.quadratic_form(nm)[ch]) / (2 * eps);
                REQUIRE(g[axis] == Catch::Approx(fd).margin(1e-7));
            }
        }
    }
}

TEST_CASE("irradiance matrix rejects non-degree-2 lights") {
    REQUIRE_THROWS_AS(irradiance_matrix(random_sh(4, 103)), std::invalid_argument);
    REQUIRE_THROWS_AS(irradiance_matrix(random_sh(1, 107)), std::invalid_argument);
}

TEST_CASE("truncation keeps low bands and drops high ones") {
    ShCoeffs sh = random_sh(4, 109);
    ShCoeffs t = sh_truncate(sh, 2);
    REQUIRE(t.degree == 2);
    REQUIRE(t.count() == 9);
    for (int j = 0; j < 9; ++j) REQUIRE(t.c[j].x == sh.c[j].x);
    REQUIRE_THROWS_AS(sh_truncate(t, 4), std::invalid_argument);
}

TEST_CASE("sh text round trip is exact") {
    ShCoeffs sh = random_sh(4, 113);
    std::stringstream ss;
    save_sh_text(sh, ss);
    std::string header;
    std::getline(std::stringstream(ss.str()), header);
    REQUIRE(header == "sh degree 4");
    ShCoeffs back = load_sh_text(ss);
    REQUIRE(back.degree == sh.degree);
    for (int j = 0; j < 25; ++j)
        for (int ch = 0; ch < 3; ++ch) REQUIRE(back.c[j][ch] == sh.c[j][ch]);
}

TEST_CASE("sh text loader rejects malformed input") {
    std::stringstream bad1("sh degre 2\n");
    REQUIRE_THROWS_AS(load_sh_text(bad1), std::runtime_error);
    std::stringstream bad2("sh degree 1\n0 0 0 0\n0 0 0 0\n0 0");
    REQUIRE_THROWS_AS(load_sh_text(bad2), std::runtime_error);
    std::stringstream bad3("sh degree 7\n");
    REQUIRE_THROWS(load_sh_text(bad3));
}

TEST_CASE("project_to_sh rejects empty input") {
    REQUIRE_THROWS_AS(project_to_sh({}, 2), std::invalid_argument);
}
