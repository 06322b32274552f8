// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "forplane/common.hpp"

namespace forplane {

// Pinhole camera. `pose` is camera-to-world; the camera looks down +z with
// +x right and +y down (image rows).
struct Camera {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  Mat4 pose = Mat4::Identity();
  double near = 0.1, far = 1.0;

  Vec3 origin() const { return pose.block<3, 1>(0, 3); }
  // Throws DataError when far <= near <= 0 or the rotation is not orthonormal.
  void validate() const;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 1.0;
  int row = 0, col = 0;
  double time = 0.0;
};

// Ray through the pixel center ((col + 0.5 - cx) / fx, (row + 0.5 - cy) / fy, 1),
// rotated into the world frame and normalized.
Ray ray_for_pixel(const Camera& cam, int row, int col, double time);

bool is_orthonormal(const Eigen::Matrix3d& r, double tol = 1e-5);

}  // namespace forplane
