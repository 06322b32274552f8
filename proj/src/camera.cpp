// SPDX-License-Identifier: Apache-2.0
#include "forplane/camera.hpp"

namespace forplane {

bool is_orthonormal(const Eigen::Matrix3d& r, double tol) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol;
}

void Camera::validate() const {
  if (!(near > 0.0) || !(far > near)) {
    throw DataError("camera needs far > near > 0");
  }
  if (width < 1 || height < 1) throw DataError("camera has empty image size");
  if (!is_orthonormal(pose.block<3, 3>(0, 0))) {
    throw DataError("camera pose rotation is not orthonormal");
  }
}

Ray ray_for_pixel(const Camera& cam, int row, int col, double time) {
  const Vec3 local((col + 0.5 - cam.cx) / cam.fx, (row + 0.5 - cam.cy) / cam.fy,
                   1.0);
  Ray ray;
  ray.origin = cam.origin();
  ray.dir = (cam.pose.block<3, 3>(0, 0) * local).normalized();
  ray.t_near = cam.near;
  ray.t_far = cam.far;
  ray.row = row;
  ray.col = col;
  ray.time = time;
  return ray;
}

}  // namespace forplane
