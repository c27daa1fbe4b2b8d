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

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"

namespace splatlight {

// Real spherical harmonics, Condon-Shortley-free, band-major indexing
// j = l(l+1)+m with m = -l..l inside each band. Directions are unit vectors
// in a right-handed z-up frame.

inline constexpr int kMaxShDegree = 4;
inline constexpr int kMaxShCoeffs = 25;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

constexpr int sh_band_of(int j) {
    int l = 0;
    while ((l + 1) * (l + 1) <= j) ++l;
    return l;
}

namespace detail {

inline void check_sh_dir(const Vec3& d) {
    if (std::fabs(d.squared_norm() - 1.0) > 1e-9)
        throw std::invalid_argument("sh: direction is not unit length");
}

inline void check_sh_degree(int degree) {
    if (degree < 0 || degree > kMaxShDegree)
        throw std::invalid_argument("sh: degree outside [0, 4]");
}

// Basis polynomial constants, k<band><|m|>
inline constexpr double k00 = 0.28209479177387814;  // 1/2 sqrt(1/pi)
inline constexpr double k11 = 0.4886025119029199;   // sqrt(3/(4 pi))
inline constexpr double k21 = 1.0925484305920792;   // 1/2 sqrt(15/pi)
inline constexpr double k20 = 0.31539156525252005;  // 1/4 sqrt(5/pi)
inline constexpr double k22 = 0.5462742152960396;   // 1/4 sqrt(15/pi)
inline constexpr double k33 = 0.5900435899266435;   // 1/4 sqrt(35/(2 pi))
inline constexpr double k32 = 2.890611442640554;    // 1/2 sqrt(105/pi)
inline constexpr double k31 = 0.4570457994644658;   // 1/4 sqrt(21/(2 pi))
inline constexpr double k30 = 0.3731763325901154;   // 1/4 sqrt(7/pi)
inline constexpr double k3c = 1.445305721320277;    // 1/4 sqrt(105/pi)
inline constexpr double k44 = 2.5033429417967046;   // 3/4 sqrt(35/pi)
inline constexpr double k43 = 1.7701307697799304;   // 3/4 sqrt(35/(2 pi))
inline constexpr double k42 = 0.9461746957575601;   // 3/4 sqrt(5/pi)
inline constexpr double k41 = 0.6690465435572892;   // 3/4 sqrt(5/(2 pi))
inline constexpr double k40 = 0.10578554691520431;  // 3/16 sqrt(1/pi)
inline constexpr double k4c = 0.47308734787878004;  // 3/8 sqrt(5/pi)
inline constexpr double k4q = 0.6258357354491761;   // 3/16 sqrt(35/pi)

}  // namespace detail

// Writes (degree+1)^2 basis values into out.
inline void eval_sh_basis(const Vec3& dir, int degree, double* out) {
    detail::check_sh_dir(dir);
    detail::check_sh_degree(degree);
    using namespace detail;
    const double x = dir.x, y = dir.y, z = dir.z;

    out[0] = k00;
    if (degree < 1) return;
    out[1] = k11 * y;
    out[2] = k11 * z;
    out[3] = k11 * x;
    if (degree < 2) return;
    out[4] = k21 * x * y;
    out[5] = k21 * y * z;
    out[6] = k20 * (3 * z * z - 1);
    out[7] = k21 * x * z;
    out[8] = k22 * (x * x - y * y);
    if (degree < 3) return;
    out[9] = k33 * y * (3 * x * x - y * y);
    out[10] = k32 * x * y * z;
    out[11] = k31 * y * (5 * z * z - 1);
    out[12] = k30 * z * (5 * z * z - 3);
    out[13] = k31 * x * (5 * z * z - 1);
    out[14] = k3c * z * (x * x - y * y);
    out[15] = k33 * x * (x * x - 3 * y * y);
    if (degree < 4) return;
    out[16] = k44 * x * y * (x * x - y * y);
    out[17] = k43 * y * z * (3 * x * x - y * y);
    out[18] = k42 * x * y * (7 * z * z - 1);
    out[19] = k41 * y * z * (7 * z * z - 3);
    out[20] = k40 * (35 * z * z * z * z - 30 * z * z + 3);
    out[21] = k41 * x * z * (7 * z * z - 3);
    out[22] = k4c * (x * x - y * y) * (7 * z * z - 1);
    out[23] = k43 * x * z * (x * x - 3 * y * y);
    out[24] = k4q * (x * x * x * x - 6 * x * x * y * y + y * y * y * y);
}

// Basis values plus the gradient of each basis polynomial in the free
// Cartesian coordinates. The unit-sphere constraint is not applied here;
// chain with normalize_backward when the direction is itself normalized.
inline void eval_sh_basis_grad(const Vec3& dir, int degree, double* out, Vec3* grad) {
    eval_sh_basis(dir, degree, out);
    using namespace detail;
    const double x = dir.x, y = dir.y, z = dir.z;

    grad[0] = {0, 0, 0};
    if (degree < 1) return;
    grad[1] = {0, k11, 0};
    grad[2] = {0, 0, k11};
    grad[3] = {k11, 0, 0};
    if (degree < 2) return;
    grad[4] = {k21 * y, k21 * x, 0};
    grad[5] = {0, k21 * z, k21 * y};
    grad[6] = {0, 0, 6 * k20 * z};
    grad[7] = {k21 * z, 0, k21 * x};
    grad[8] = {2 * k22 * x, -2 * k22 * y, 0};
    if (degree < 3) return;
    grad[9] = {6 * k33 * x * y, 3 * k33 * (x * x - y * y), 0};
    grad[10] = {k32 * y * z, k32 * x * z, k32 * x * y};
    grad[11] = {0, k31 * (5 * z * z - 1), 10 * k31 * y * z};
    grad[12] = {0, 0, k30 * (15 * z * z - 3)};
    grad[13] = {k31 * (5 * z * z - 1), 0, 10 * k31 * x * z};
    grad[14] = {2 * k3c * x * z, -2 * k3c * y * z, k3c * (x * x - y * y)};
    grad[15] = {3 * k33 * (x * x - y * y), -6 * k33 * x * y, 0};
    if (degree < 4) return;
    grad[16] = {k44 * y * (3 * x * x - y * y), k44 * x * (x * x - 3 * y * y), 0};
    grad[17] = {6 * k43 * x * y * z, 3 * k43 * z * (x * x - y * y), k43 * y * (3 * x * x - y * y)};
    grad[18] = {k42 * y * (7 * z * z - 1), k42 * x * (7 * z * z - 1), 14 * k42 * x * y * z};
    grad[19] = {0, k41 * z * (7 * z * z - 3), k41 * y * (21 * z * z - 3)};
    grad[20] = {0, 0, k40 * (140 * z * z * z - 60 * z)};
    grad[21] = {k41 * z * (7 * z * z - 3), 0, k41 * x * (21 * z * z - 3)};
    grad[22] = {2 * k4c * x * (7 * z * z - 1), -2 * k4c * y * (7 * z * z - 1),
                14 * k4c * z * (x * x - y * y)};
    grad[23] = {3 * k43 * z * (x * x - y * y), -6 * k43 * x * y * z, k43 * x * (x * x - 3 * y * y)};
    grad[24] = {k4q * (4 * x * x * x - 12 * x * y * y), k4q * (4 * y * y * y - 12 * x * x * y), 0};
}

// RGB spherical-harmonic coefficient set (one Vec3 per basis function).
struct ShCoeffs {
    int degree = 0;
    std::vector<Vec3> c;

    static ShCoeffs zeros(int degree) {
        detail::check_sh_degree(degree);
        ShCoeffs sh;
        sh.degree = degree;
        sh.c.assign(sh_coeff_count(degree), Vec3{0, 0, 0});
        return sh;
    }

    int count() const { return static_cast<int>(c.size()); }

    bool all_finite() const {
        for (const Vec3& v : c)
            if (!v.all_finite()) return false;
        return true;
    }

    void check() const {
        detail::check_sh_degree(degree);
        if (count() != sh_coeff_count(degree))
            throw std::invalid_argument("sh: coefficient count does not match degree");
    }
};

inline ShCoeffs sh_truncate(const ShCoeffs& sh, int degree) {
    sh.check();
    if (degree > sh.degree) throw std::invalid_argument("sh: cannot truncate upward");
    ShCoeffs out = ShCoeffs::zeros(degree);
    for (int j = 0; j < out.count(); ++j) out.c[j] = sh.c[j];
    return out;
}

// Radiance of the band-limited function in a direction. Unclamped: callers
// decide how to treat negative lobes.
inline Vec3 eval_sh(const ShCoeffs& sh, const Vec3& dir) {
    sh.check();
    double basis[kMaxShCoeffs];
    eval_sh_basis(dir, sh.degree, basis);
    Vec3 rgb{0, 0, 0};
    for (int j = 0; j < sh.count(); ++j) rgb += sh.c[j] * basis[j];
    return rgb;
}

// Adjoints of eval_sh: given d(loss)/d(rgb), accumulates d(loss)/d(coeffs)
// into d_coeffs (if non-null) and returns d(loss)/d(dir) as free Cartesian
// partials (normalize chain is the caller's).
inline Vec3 eval_sh_backward(const ShCoeffs& sh, const Vec3& dir, const Vec3& d_rgb,
                             ShCoeffs* d_coeffs = nullptr) {
    sh.check();
    double basis[kMaxShCoeffs];
    Vec3 grad[kMaxShCoeffs];
    eval_sh_basis_grad(dir, sh.degree, basis, grad);
    Vec3 d_dir{0, 0, 0};
    for (int j = 0; j < sh.count(); ++j) {
        d_dir += grad[j] * sh.c[j].dot(d_rgb);
        if (d_coeffs) d_coeffs->c[j] += d_rgb * basis[j];
    }
    return d_dir;
}

struct ShSample {
    Vec3 dir;          // unit
    Vec3 value;        // rgb
    double weight = 0; // solid angle
};

// Quadrature projection: coeffs[j] = sum_k w_k value_k Y_j(dir_k). Weights
// must tile the sphere (sum 4pi) or a hemisphere (sum 2pi, rest treated as
// zero radiance).
inline ShCoeffs project_to_sh(const std::vector<ShSample>& samples, int degree) {
    detail::check_sh_degree(degree);
    if (samples.empty()) throw std::invalid_argument("sh: empty sample list");
    ShCoeffs out = ShCoeffs::zeros(degree);
    double basis[kMaxShCoeffs];
    for (const ShSample& s : samples) {
        eval_sh_basis(s.dir, degree, basis);
        for (int j = 0; j < out.count(); ++j) out.c[j] += s.value * (s.weight * basis[j]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Zonal Gaussian blur
// ---------------------------------------------------------------------------

// Band multiplier exp(-l(l+1) s^2) for blur strength s.
inline double sh_blur_band_multiplier(int l, double strength) {
    return std::exp(-double(l * (l + 1)) * strength * strength);
}

inline ShCoeffs sh_blur_with_strength(const ShCoeffs& sh, double strength) {
    sh.check();
    ShCoeffs out = sh;
    for (int j = 0; j < out.count(); ++j) {
        double mul = sh_blur_band_multiplier(sh_band_of(j), strength);
        out.c[j] = out.c[j] * mul;
    }
    return out;
}

// Roughness-driven blur. Strength is roughness^exponent; the default
// exponent 2 reads the kernel argument as (roughness^2)^2, the alternative 1
// as roughness^2. See ShadingConfig::blur_exponent.
inline ShCoeffs sh_gaussian_blur(const ShCoeffs& sh, double roughness, int exponent = 2) {
    if (roughness < 0.0 || roughness > 1.0)
        throw std::invalid_argument("sh: roughness outside [0, 1]");
    double strength = exponent == 1 ? roughness : std::pow(roughness, double(exponent));
    return sh_blur_with_strength(sh, strength);
}

// ---------------------------------------------------------------------------
// Diffuse irradiance matrix
// ---------------------------------------------------------------------------

// Cosine-lobe zonal scaling per band for hemispherical irradiance.
inline constexpr double kHatA0 = kPi;
inline constexpr double kHatA1 = 2.0 * kPi / 3.0;
inline constexpr double kHatA2 = kPi / 4.0;

inline double irradiance_band_factor(int l) {
    switch (l) {
        case 0: return kHatA0;
        case 1: return kHatA1;
        case 2: return kHatA2;
        default: return 0.0;
    }
}

// Per-channel symmetric 4x4 matrix M with (n, 1)^T M (n, 1) equal to the
// hemispherical irradiance of the degree-2 band-limited light at normal n.
struct IrradianceMatrix {
    double m[3][4][4] = {};

    Vec3 quadratic_form(const Vec3& n) const {
        const double h[4] = {n.x, n.y, n.z, 1.0};
        Vec3 e{0, 0, 0};
        for (int ch = 0; ch < 3; ++ch) {
            double acc = 0;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) acc += h[i] * m[ch][i][j] * h[j];
            e[ch] = acc;
        }
        return e;
    }

    // d(quadratic form)/dn per channel: 2 (M n~)_{xyz} by symmetry.
    Vec3 quadratic_form_grad(const Vec3& n, int ch) const {
        const double h[4] = {n.x, n.y, n.z, 1.0};
        Vec3 g{0, 0, 0};
        for (int i = 0; i < 3; ++i) {
            double acc = 0;
            for (int j = 0; j < 4; ++j) acc += m[ch][i][j] * h[j];
            g[i] = 2.0 * acc;
        }
        return g;
    }
};

inline IrradianceMatrix irradiance_matrix(const ShCoeffs& light_deg2) {
    light_deg2.check();
    if (light_deg2.degree != 2)
        throw std::invalid_argument("sh: irradiance matrix needs a degree-2 light");
    using namespace detail;
    const double c1 = kHatA2 * k22;
    const double c2 = 0.5 * kHatA1 * k11;
    const double c3 = 3.0 * kHatA2 * k20;
    const double c4 = kHatA0 * k00;
    const double c5 = kHatA2 * k20;

    IrradianceMatrix out;
    for (int ch = 0; ch < 3; ++ch) {
        auto L = [&](int j) { return light_deg2.c[j][ch]; };
        double(&M)[4][4] = out.m[ch];
        M[0][0] = c1 * L(8);
        M[0][1] = M[1][0] = c1 * L(4);
        M[0][2] = M[2][0] = c1 * L(7);
        M[0][3] = M[3][0] = c2 * L(3);
        M[1][1] = -c1 * L(8);
        M[1][2] = M[2][1] = c1 * L(5);
        M[1][3] = M[3][1] = c2 * L(1);
        M[2][2] = c3 * L(6);
        M[2][3] = M[3][2] = c2 * L(2);
        M[3][3] = c4 * L(0) - c5 * L(6);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Text round trip: "sh degree L" then one line per channel (R, G, B) of
// (L+1)^2 numbers.
// ---------------------------------------------------------------------------

inline void save_sh_text(const ShCoeffs& sh, std::ostream& os) {
    sh.check();
    os << "sh degree " << sh.degree << "\n";
    char buf[64];
    for (int ch = 0; ch < 3; ++ch) {
        for (int j = 0; j < sh.count(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", sh.c[j][ch]);
            os << (j ? " " : "") << buf;
        }
        os << "\n";
    }
}

inline void save_sh_text(const ShCoeffs& sh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("sh: cannot open for writing: " + path);
    save_sh_text(sh, os);
}

inline ShCoeffs load_sh_text(std::istream& is) {
    std::string word_sh, word_degree;
    int degree = -1;
    if (!(is >> word_sh >> word_degree >> degree) || word_sh != "sh" || word_degree != "degree")
        throw std::runtime_error("sh: malformed header, expected \"sh degree L\"");
    detail::check_sh_degree(degree);
    ShCoeffs sh = ShCoeffs::zeros(degree);
    for (int ch = 0; ch < 3; ++ch)
        for (int j = 0; j < sh.count(); ++j)
            if (!(is >> sh.c[j][ch])) throw std::runtime_error("sh: truncated coefficient table");
    if (!sh.all_finite()) throw std::runtime_error("sh: non-finite coefficient");
    return sh;
}

inline ShCoeffs load_sh_text(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("sh: cannot open: " + path);
    return load_sh_text(is);
}

}  // namespace splatlight
