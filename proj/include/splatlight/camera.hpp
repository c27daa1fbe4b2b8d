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

#include "common.hpp"

namespace splatlight {

// Pinhole camera. `rotation`/`translation` form the world-to-camera rigid
// transform x_cam = R x_world + t; the camera looks down +z in its own frame.
struct Camera {
    Mat3 rotation = Mat3::identity();
    Vec3 translation{0, 0, 0};
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;
    double near = 0.01;

    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }

    // Camera center expressed in world coordinates: -R^T t.
    Vec3 position() const { return rotation.transposed() * (translation * -1.0); }

    void check() const {
        if (!(fx > 0.0) || !(fy > 0.0))
            throw std::invalid_argument("camera: focal lengths must be positive");
        if (width < 8 || height < 8)
            throw std::invalid_argument("camera: viewport must be at least 8x8");
        if (!(near > 0.0)) throw std::invalid_argument("camera: near plane must be positive");
    }
};

// Convenience constructor used heavily by tests and synthetic scenes:
// camera at `eye` looking toward `target`, `up_hint` fixing the roll.
// The camera frame is right-handed with +x right, +y down, +z forward.
inline Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up_hint,
                             double focal, int width, int height) {
    const Vec3 fwd = (target - eye).normalized();
    Vec3 right = fwd.cross(up_hint);
    if (right.norm() < 1e-9) right = fwd.cross(Vec3{0.0, 0.0, 1.0});
    if (right.norm() < 1e-9) right = fwd.cross(Vec3{0.0, 1.0, 0.0});
    right = right.normalized();
    const Vec3 down = fwd.cross(right);
    // Rows of R are the camera axes expressed in world coordinates.
    Camera cam;
    cam.rotation = Mat3::from_rows(right, down, fwd);
    cam.translation = (cam.rotation * eye) * -1.0;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    return cam;
}

}  // namespace splatlight
