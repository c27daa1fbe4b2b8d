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
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace splatlight {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Small fixed-size linear algebra. Everything is double precision; the whole
// pipeline trades speed for exactness so that finite-difference checks of the
// analytic gradients stay meaningful.
// ---------------------------------------------------------------------------

struct Vec2 {
    double x = 0, y = 0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
};

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    Vec3 cwise(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    double squared_norm() const { return x * x + y * y + z * z; }
    Vec3 normalized() const { return *this / norm(); }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    double min_coeff() const { return std::min(x, std::min(y, z)); }
    double max_coeff() const { return std::max(x, std::max(y, z)); }
    bool all_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

struct Vec4 {
    double w = 0, x = 0, y = 0, z = 0;  // quaternion order (w, x, y, z)

    Vec4() = default;
    Vec4(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

    Vec4 operator+(const Vec4& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
    Vec4 operator-(const Vec4& o) const { return {w - o.w, x - o.x, y - o.y, z - o.z}; }
    Vec4 operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
    Vec4& operator+=(const Vec4& o) { w += o.w; x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec4& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec4 normalized() const { double n = norm(); return {w / n, x / n, y / n, z / n}; }

    double operator[](int i) const { return (&w)[i]; }
    double& operator[](int i) { return (&w)[i]; }
};

struct Mat2 {
    // row major: [a b; b c] is represented with all four entries
    double m00 = 0, m01 = 0, m10 = 0, m11 = 0;

    double det() const { return m00 * m11 - m01 * m10; }
    Mat2 inverse() const {
        double d = det();
        return {m11 / d, -m01 / d, -m10 / d, m00 / d};
    }
    double trace() const { return m00 + m11; }
    // largest eigenvalue of a symmetric 2x2
    double max_eigenvalue() const {
        double mid = 0.5 * trace();
        double dis = std::sqrt(std::max(0.0, mid * mid - det()));
        return mid + dis;
    }
};

struct Mat3 {
    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

    static Mat3 identity() {
        Mat3 r;
        r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
        return r;
    }
    static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
        Mat3 r;
        for (int j = 0; j < 3; ++j) {
            r.m[0][j] = r0[j];
            r.m[1][j] = r1[j];
            r.m[2][j] = r2[j];
        }
        return r;
    }
    static Mat3 outer(const Vec3& a, const Vec3& b) {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = a[i] * b[j];
        return r;
    }

    Vec3 row(int i) const { return {m[i][0], m[i][1], m[i][2]}; }
    Vec3 col(int j) const { return {m[0][j], m[1][j], m[2][j]}; }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
        return r;
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }
    Vec3 operator*(const Vec3& v) const {
        return {row(0).dot(v), row(1).dot(v), row(2).dot(v)};
    }
    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }
    Mat3 operator*(double s) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] * s;
        return r;
    }
    Mat3& operator+=(const Mat3& o) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m[i][j] += o.m[i][j];
        return *this;
    }
    // Frobenius inner product
    double ddot(const Mat3& o) const {
        double s = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s += m[i][j] * o.m[i][j];
        return s;
    }
};

// Rotation matrix of a *unit* quaternion (w, x, y, z). Columns are the local
// axes expressed in world space.
inline Mat3 quat_to_rotation(const Vec4& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r.m[0][0] = 1 - 2 * (y * y + z * z);
    r.m[0][1] = 2 * (x * y - w * z);
    r.m[0][2] = 2 * (x * z + w * y);
    r.m[1][0] = 2 * (x * y + w * z);
    r.m[1][1] = 1 - 2 * (x * x + z * z);
    r.m[1][2] = 2 * (y * z - w * x);
    r.m[2][0] = 2 * (x * z - w * y);
    r.m[2][1] = 2 * (y * z + w * x);
    r.m[2][2] = 1 - 2 * (x * x + y * y);
    return r;
}

// Partial derivatives of quat_to_rotation with respect to each unit-quaternion
// component. Chain with the normalization Jacobian for raw (unnormalized)
// quaternion parameters.
inline std::array<Mat3, 4> quat_to_rotation_jacobian(const Vec4& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 dw, dx, dy, dz;

    dw.m[0][0] = 0;      dw.m[0][1] = -2 * z; dw.m[0][2] = 2 * y;
    dw.m[1][0] = 2 * z;  dw.m[1][1] = 0;      dw.m[1][2] = -2 * x;
    dw.m[2][0] = -2 * y; dw.m[2][1] = 2 * x;  dw.m[2][2] = 0;

    dx.m[0][0] = 0;      dx.m[0][1] = 2 * y;  dx.m[0][2] = 2 * z;
    dx.m[1][0] = 2 * y;  dx.m[1][1] = -4 * x; dx.m[1][2] = -2 * w;
    dx.m[2][0] = 2 * z;  dx.m[2][1] = 2 * w;  dx.m[2][2] = -4 * x;

    dy.m[0][0] = -4 * y; dy.m[0][1] = 2 * x;  dy.m[0][2] = 2 * w;
    dy.m[1][0] = 2 * x;  dy.m[1][1] = 0;      dy.m[1][2] = 2 * z;
    dy.m[2][0] = -2 * w; dy.m[2][1] = 2 * z;  dy.m[2][2] = -4 * y;

    dz.m[0][0] = -4 * z; dz.m[0][1] = -2 * w; dz.m[0][2] = 2 * x;
    dz.m[1][0] = 2 * w;  dz.m[1][1] = -4 * z; dz.m[1][2] = 2 * y;
    dz.m[2][0] = 2 * x;  dz.m[2][1] = 2 * y;  dz.m[2][2] = 0;

    return {dw, dx, dy, dz};
}

// Backpropagates a gradient w.r.t. the normalized quaternion onto the raw one:
// d/dq_raw = (I - q_hat q_hat^T) / |q_raw| applied to d/dq_hat.
inline Vec4 normalize_quat_backward(const Vec4& q_raw, const Vec4& d_unit) {
    const double n = q_raw.norm();
    const Vec4 u = q_raw * (1.0 / n);
    const double proj = u.dot(d_unit);
    return (d_unit - u * proj) * (1.0 / n);
}

inline Vec3 normalize_backward(const Vec3& v_raw, const Vec3& d_unit) {
    const double n = v_raw.norm();
    const Vec3 u = v_raw / n;
    return (d_unit - u * u.dot(d_unit)) / n;
}

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
inline Vec3 clamp01(const Vec3& v) { return {clamp01(v.x), clamp01(v.y), clamp01(v.z)}; }

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double inverse_sigmoid(double p) { return std::log(p / (1.0 - p)); }

inline bool nearly_unit(const Vec3& v, double tol = 1e-6) {
    return std::fabs(v.squared_norm() - 1.0) <= tol;
}

// ---------------------------------------------------------------------------
// Deterministic random numbers. PCG32 keeps the streams identical across
// platforms and standard libraries; the distribution helpers below are our
// own for the same reason.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t v) {
    v += 0x9e3779b97f4a7c15ull;
    v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ull;
    v = (v ^ (v >> 27)) * 0x94d049bb133111ebull;
    return v ^ (v >> 31);
}

// Mixes a base seed with salts, e.g. (run seed, iteration) or
// (run seed, iteration, gaussian index). Every stochastic component derives
// its stream this way, which keeps training resumable without serializing
// generator state.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt_a, uint64_t salt_b = 0) {
    return splitmix64(splitmix64(seed ^ splitmix64(salt_a)) ^ splitmix64(salt_b));
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0x853c49e6748fea9bull) {
        state_ = 0;
        inc_ = (seed << 1u) | 1u;
        next_u32();
        state_ += splitmix64(seed);
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    // uniform in [0, 1)
    double uniform() {
        uint64_t hi = next_u32();
        uint64_t lo = next_u32();
        return static_cast<double>((hi << 21) ^ lo) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    uint32_t uniform_index(uint32_t n) {
        return static_cast<uint32_t>(uniform() * n) % n;
    }

    double normal() {
        // Box-Muller, no spare caching so the stream is call-order exact
        double u1 = std::max(uniform(), 1e-300);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    Vec3 uniform_sphere() {
        double z = uniform(-1.0, 1.0);
        double phi = uniform(0.0, 2.0 * kPi);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

    // z >= 0 half of the sphere
    Vec3 uniform_hemisphere() {
        Vec3 v = uniform_sphere();
        v.z = std::fabs(v.z);
        return v;
    }

private:
    uint64_t state_;
    uint64_t inc_;
};

// ---------------------------------------------------------------------------
// Deterministic task fan-out. Work is split into tasks indexed 0..n-1; each
// task writes only slots it owns, so results never depend on the worker
// count. Callers that reduce across tasks must merge the per-task buffers in
// index order.
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_for(std::size_t task_count, unsigned num_threads, Fn&& fn) {
    if (task_count == 0) return;
    if (num_threads <= 1 || task_count == 1) {
        for (std::size_t t = 0; t < task_count; ++t) fn(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t t = next.fetch_add(1);
            if (t >= task_count) break;
            fn(t);
        }
    };
    unsigned spawn = std::min<unsigned>(num_threads, static_cast<unsigned>(task_count)) - 1;
    std::vector<std::thread> pool;
    pool.reserve(spawn);
    for (unsigned i = 0; i < spawn; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

}  // namespace splatlight
