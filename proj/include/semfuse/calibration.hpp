// Copyright 2026 The semfuse Authors
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

#ifndef SEMFUSE__CALIBRATION_HPP_
#define SEMFUSE__CALIBRATION_HPP_

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

namespace semfuse
{

/// Camera/LiDAR calibration of one KITTI frame.
struct Calibration
{
  Eigen::Matrix<double, 3, 4> p2 = Eigen::Matrix<double, 3, 4>::Zero();
  Eigen::Matrix3d r0_rect = Eigen::Matrix3d::Identity();
  Eigen::Matrix<double, 3, 4> tr_velo_to_cam = Eigen::Matrix<double, 3, 4>::Zero();

  /// Homogeneous LiDAR -> rectified camera transform, R0_rect * Tr_velo_to_cam.
  Eigen::Matrix4d velo_to_rect() const
  {
    Eigen::Matrix4d r0 = Eigen::Matrix4d::Identity();
    r0.topLeftCorner<3, 3>() = r0_rect;
    Eigen::Matrix4d tr = Eigen::Matrix4d::Identity();
    tr.topRows<3>() = tr_velo_to_cam;
    return r0 * tr;
  }

  Eigen::Vector3d lidar_to_rect(const Eigen::Vector3d & p) const
  {
    return (velo_to_rect() * p.homogeneous()).head<3>();
  }

  Eigen::Vector3d rect_to_lidar(const Eigen::Vector3d & p) const
  {
    return (velo_to_rect().inverse() * p.homogeneous()).head<3>();
  }

  /// R0_rect and the rotation block of Tr_velo_to_cam are orthonormal within `tol`.
  bool is_valid(double tol = 1e-3) const
  {
    const Eigen::Matrix3d rot = tr_velo_to_cam.leftCols<3>();
    return (r0_rect * r0_rect.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <=
             tol &&
           (rot * rot.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol;
  }

  /// The standard KITTI axis permutation (camera x = -lidar y, y = -lidar z, z = lidar x)
  /// with a pinhole P2. Handy for synthetic data.
  static Calibration canonical(double focal, double cu, double cv)
  {
    Calibration c;
    c.p2 << focal, 0, cu, 0, 0, focal, cv, 0, 0, 0, 1, 0;
    c.tr_velo_to_cam << 0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0;
    return c;
  }
};

}  // namespace semfuse

#endif  // SEMFUSE__CALIBRATION_HPP_
