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

#ifndef SEMFUSE__GEOMETRY_HPP_
#define SEMFUSE__GEOMETRY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "semfuse/calibration.hpp"
#include "semfuse/types.hpp"

namespace semfuse::geometry
{

/// On-edge tolerance for polygon clipping, in meters.
inline constexpr double kClipEps = 1e-9;
/// Intersections smaller than this (m^2) are treated as empty.
inline constexpr double kAreaEps = 1e-12;

using Polygon = std::vector<Eigen::Vector2d>;

/// Wraps an angle into (-pi, pi]. Values already in range are returned unchanged.
inline double normalize_angle(double a)
{
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) {
    r += 2.0 * std::numbers::pi;
  }
  return r;
}

// --- Cylindrical coordinates ----------------------------------------------

struct CylPoint
{
  double rho = 0.0;
  double phi = 0.0;  // (-pi, pi]
  double z = 0.0;
};

inline CylPoint cart_to_cyl(const Eigen::Vector3d & p)
{
  CylPoint c;
  c.rho = std::hypot(p.x(), p.y());
  c.z = p.z();
  if (c.rho == 0.0) {
    c.phi = 0.0;  // atan2 is undefined at the axis
  } else {
    c.phi = std::atan2(p.y(), p.x());
    if (c.phi == -std::numbers::pi) {
      c.phi = std::numbers::pi;
    }
  }
  return c;
}

inline Eigen::Vector3d cyl_to_cart(const CylPoint & c)
{
  return {c.rho * std::cos(c.phi), c.rho * std::sin(c.phi), c.z};
}

// --- Projection ------------------------------------------------------------

struct ImagePoint
{
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // camera-frame z
};

/// Precomputed LiDAR -> image chain for projecting many points with one calibration.
class LidarProjector
{
public:
  explicit LidarProjector(const Calibration & calib)
  : velo_to_rect_(calib.velo_to_rect()), p2_(calib.p2)
  {
  }

  /// std::nullopt means the point is behind the camera.
  std::optional<ImagePoint> operator()(const Eigen::Vector3d & p) const
  {
    const Eigen::Vector4d rect = velo_to_rect_ * p.homogeneous();
    if (rect.z() <= 0.0) {
      return std::nullopt;
    }
    const Eigen::Vector3d uvw = p2_ * rect;
    if (uvw.z() <= 0.0) {
      return std::nullopt;
    }
    return ImagePoint{uvw.x() / uvw.z(), uvw.y() / uvw.z(), rect.z()};
  }

private:
  Eigen::Matrix4d velo_to_rect_;
  Eigen::Matrix<double, 3, 4> p2_;
};

inline std::optional<ImagePoint> project_lidar_to_image(
  const Eigen::Vector3d & p, const Calibration & calib)
{
  return LidarProjector(calib)(p);
}

// --- Boxes -----------------------------------------------------------------

/// Footprint corners, counter-clockwise.
inline std::array<Eigen::Vector2d, 4> bev_corners(const Box3D & b)
{
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double hl = 0.5 * b.l;
  const double hw = 0.5 * b.w;
  const std::array<Eigen::Vector2d, 4> local = {
    Eigen::Vector2d(hl, hw), Eigen::Vector2d(-hl, hw), Eigen::Vector2d(-hl, -hw),
    Eigen::Vector2d(hl, -hw)};
  std::array<Eigen::Vector2d, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {b.x + c * local[i].x() - s * local[i].y(), b.y + s * local[i].x() + c * local[i].y()};
  }
  return out;
}

/// Bottom face (counter-clockwise) followed by the top face.
inline std::array<Eigen::Vector3d, 8> box_corners(const Box3D & b)
{
  const auto foot = bev_corners(b);
  std::array<Eigen::Vector3d, 8> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {foot[i].x(), foot[i].y(), b.z - 0.5 * b.h};
    out[i + 4] = {foot[i].x(), foot[i].y(), b.z + 0.5 * b.h};
  }
  return out;
}

/// Point expressed in the box frame: box center at the origin, heading along +x.
inline Eigen::Vector3d to_box_frame(const Eigen::Vector3d & p, const Box3D & b)
{
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double dx = p.x() - b.x;
  const double dy = p.y() - b.y;
  return {c * dx + s * dy, -s * dx + c * dy, p.z() - b.z};
}

inline Eigen::Vector3d from_box_frame(const Eigen::Vector3d & q, const Box3D & b)
{
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  return {b.x + c * q.x() - s * q.y(), b.y + s * q.x() + c * q.y(), b.z + q.z()};
}

inline bool contains(const Box3D & b, const Eigen::Vector3d & p, double tol = 1e-6)
{
  const Eigen::Vector3d q = to_box_frame(p, b);
  return std::abs(q.x()) <= 0.5 * b.l + tol && std::abs(q.y()) <= 0.5 * b.w + tol &&
         std::abs(q.z()) <= 0.5 * b.h + tol;
}

inline PointCloud canonical_transform(const PointCloud & points, const Box3D & b)
{
  PointCloud out;
  out.reserve(points.size());
  for (const auto & p : points) {
    const Eigen::Vector3d q = to_box_frame({p.x, p.y, p.z}, b);
    out.push_back(
      {static_cast<float>(q.x()), static_cast<float>(q.y()), static_cast<float>(q.z()), p.r});
  }
  return out;
}

inline PointCloud inverse_canonical_transform(const PointCloud & points, const Box3D & b)
{
  PointCloud out;
  out.reserve(points.size());
  for (const auto & p : points) {
    const Eigen::Vector3d q = from_box_frame({p.x, p.y, p.z}, b);
    out.push_back(
      {static_cast<float>(q.x()), static_cast<float>(q.y()), static_cast<float>(q.z()), p.r});
  }
  return out;
}

// --- Rotated IoU -----------------------------------------------------------

inline double polygon_area(std::span<const Eigen::Vector2d> poly)
{
  if (poly.size() < 3) {
    return 0.0;
  }
  double twice = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const auto & a = poly[i];
    const auto & b = poly[(i + 1) % n];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

/// Sutherland-Hodgman: clips `subject` against the convex, counter-clockwise `clip`.
inline Polygon clip_convex(
  std::span<const Eigen::Vector2d> subject, std::span<const Eigen::Vector2d> clip,
  double eps = kClipEps)
{
  Polygon out(subject.begin(), subject.end());
  Polygon in;
  for (std::size_t i = 0, m = clip.size(); i < m && !out.empty(); ++i) {
    const Eigen::Vector2d a = clip[i];
    Eigen::Vector2d edge = clip[(i + 1) % m] - a;
    const double len = edge.norm();
    if (len == 0.0) {
      continue;
    }
    edge /= len;
    // Signed distance to the edge line; positive on the inner (left) side.
    const auto dist = [&](const Eigen::Vector2d & p) {
      const Eigen::Vector2d d = p - a;
      return edge.x() * d.y() - edge.y() * d.x();
    };
    in.swap(out);
    out.clear();
    for (std::size_t j = 0, n = in.size(); j < n; ++j) {
      const Eigen::Vector2d & cur = in[j];
      const Eigen::Vector2d & prev = in[(j + n - 1) % n];
      const double dc = dist(cur);
      const double dp = dist(prev);
      const bool cur_in = dc >= -eps;
      const bool prev_in = dp >= -eps;
      if (cur_in != prev_in) {
        const double t = dp / (dp - dc);
        out.push_back(prev + t * (cur - prev));
      }
      if (cur_in) {
        out.push_back(cur);
      }
    }
  }
  return out;
}

namespace detail
{
inline auto box_key(const Box3D & b) { return std::tie(b.x, b.y, b.z, b.w, b.h, b.l, b.yaw); }
}  // namespace detail

/// Area of the intersection of two box footprints. Evaluated in a canonical argument
/// order so the result is bitwise symmetric.
inline double bev_intersection_area(const Box3D & a, const Box3D & b)
{
  const bool swap = detail::box_key(b) < detail::box_key(a);
  const auto pa = bev_corners(swap ? b : a);
  const auto pb = bev_corners(swap ? a : b);
  const Polygon inter = clip_convex(pa, pb);
  const double area = polygon_area(inter);
  return area > kAreaEps ? area : 0.0;
}

inline double bev_iou(const Box3D & a, const Box3D & b)
{
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0.0) {
    return 0.0;
  }
  const double uni = a.w * a.l + b.w * b.l - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

inline double vertical_overlap(const Box3D & a, const Box3D & b)
{
  const double top = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
  const double bottom = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
  return std::max(0.0, top - bottom);
}

inline double iou_3d(const Box3D & a, const Box3D & b)
{
  const double dz = vertical_overlap(a, b);
  if (dz <= 0.0) {
    return 0.0;
  }
  const double inter = bev_intersection_area(a, b) * dz;
  if (inter <= 0.0) {
    return 0.0;
  }
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

}  // namespace semfuse::geometry

#endif  // SEMFUSE__GEOMETRY_HPP_
