// Copyright 2026 The anchordist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <anchordist/types.hpp>

#include <cmath>
#include <stdexcept>

namespace anchordist {

/// Pinhole intrinsics. Camera frame is x right, y down, z forward.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  bool valid() const { return fx > 0.0 && fy > 0.0 && std::isfinite(cx) && std::isfinite(cy); }
  void validate() const {
    if (!valid()) throw std::domain_error("camera intrinsics require fx > 0 and fy > 0");
  }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Unit-length viewing direction in the camera frame.
struct Ray {
  Vec3 direction = Vec3::UnitZ();
};

inline Ray pixel_to_ray(const CameraIntrinsics& intr, double u, double v) {
  const Vec3 dir((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
  return {dir.normalized()};
}

/// Back-projects an object along `ray` to Euclidean range `distance`.
inline Vec3 locate_object(const Ray& ray, double distance) {
  if (!(distance > 0.0)) throw std::domain_error("locate_object: distance must be positive");
  return ray.direction * distance;
}

inline double distance_of(const Vec3& location) { return location.norm(); }
inline double depth_of(const Vec3& location) { return location.z(); }

inline Vec2 project_to_image(const CameraIntrinsics& intr, const Vec3& location) {
  if (!(location.z() > 0.0)) throw std::domain_error("project_to_image: point is not in front of the camera");
  return {intr.fx * location.x() / location.z() + intr.cx,
          intr.fy * location.y() / location.z() + intr.cy};
}

/// Bird-eye-view coordinates (x, z).
inline Vec2 to_bev(const Vec3& location) { return {location.x(), location.z()}; }

}  // namespace anchordist
