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

#ifndef SEMFUSE__AUGMENTATION_HPP_
#define SEMFUSE__AUGMENTATION_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semfuse/errors.hpp"
#include "semfuse/geometry.hpp"
#include "semfuse/rng.hpp"
#include "semfuse/types.hpp"

namespace semfuse::augmentation
{

/// A fused frame and its LiDAR-frame ground-truth boxes.
struct Scene
{
  FusedPointCloud points;
  std::vector<Box3D> boxes;
};

struct GtEntry
{
  Box3D box;
  FusedPointCloud points;  // frame coordinates, inside `box`
  std::string frame_id;
};

struct GtDatabase
{
  std::array<std::vector<GtEntry>, kNumKittiClasses> entries;

  const std::vector<GtEntry> & of(KittiClass c) const { return entries[index_of(c)]; }
  std::size_t size() const
  {
    std::size_t n = 0;
    for (const auto & e : entries) {
      n += e.size();
    }
    return n;
  }
};

struct GtFrame
{
  std::string id;
  Scene scene;
};

struct AugmentConfig
{
  double rotation_min = -std::numbers::pi / 4.0;
  double rotation_max = std::numbers::pi / 4.0;
  double scale_min = 0.95;
  double scale_max = 1.05;
  double flip_probability = 0.5;
  /// Database samples requested per frame, indexed by KittiClass.
  std::array<std::size_t, kNumKittiClasses> sample_counts{0, 15, 10, 10};
  /// Per-box noise: uniform yaw in [-box_rotation, box_rotation], Gaussian translation.
  double box_rotation = std::numbers::pi / 9.0;
  double box_translation_sigma = 0.25;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (!(rotation_min <= rotation_max)) throw InvalidConfig("rotation range is not ordered");
    if (!(scale_min <= scale_max) || !(scale_min > 0.0)) {
      throw InvalidConfig("scale range must be ordered and positive");
    }
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
      throw InvalidConfig("flip probability must be in [0, 1]");
    }
    if (!(box_rotation >= 0.0) || !(box_translation_sigma >= 0.0)) {
      throw InvalidConfig("per-box noise must be non-negative");
    }
  }
};

struct AugmentStats
{
  std::size_t original_boxes = 0;
  std::size_t placed = 0;
  std::size_t rejected = 0;
  std::size_t placed_points = 0;
  std::size_t reverted = 0;
  bool flipped = false;
  double rotation = 0.0;
  double scale = 1.0;
};

inline Eigen::Vector3d xyz(const FusedPoint & f) { return {f[0], f[1], f[2]}; }

inline void set_xyz(FusedPoint & f, const Eigen::Vector3d & p)
{
  f[0] = static_cast<float>(p.x());
  f[1] = static_cast<float>(p.y());
  f[2] = static_cast<float>(p.z());
}

inline std::vector<std::size_t> points_in_box(const FusedPointCloud & points, const Box3D & box)
{
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (geometry::contains(box, xyz(points[i]))) {
      idx.push_back(i);
    }
  }
  return idx;
}

/// True if `box` overlaps any of `others` in bird's-eye view.
inline bool collides(const Box3D & box, std::span<const Box3D> others)
{
  return std::any_of(others.begin(), others.end(), [&](const Box3D & o) { return geometry::bev_iou(box, o) > 0.0; });
}

// --- Ground-truth database -------------------------------------------------

/// Crops the points of every labeled (non-Unlabeled) box. Boxes without points are kept.
inline GtDatabase build_gt_database(std::span<const GtFrame> frames)
{
  GtDatabase db;
  for (const auto & frame : frames) {
    for (const auto & box : frame.scene.boxes) {
      if (box.cls == KittiClass::Unlabeled) {
        continue;
      }
      GtEntry e{box, {}, frame.id};
      for (const auto i : points_in_box(frame.scene.points, box)) {
        e.points.push_back(frame.scene.points[i]);
      }
      db.entries[index_of(box.cls)].push_back(std::move(e));
    }
  }
  return db;
}

/// Pastes randomly chosen database objects into the scene. A candidate that overlaps an
/// existing or previously placed box is rejected and the scene is left as it was.
inline Scene sample_gt(const GtDatabase & db, Scene scene, const AugmentConfig & cfg, Rng & rng, AugmentStats * stats = nullptr)
{
  AugmentStats local;
  AugmentStats & st = stats != nullptr ? *stats : local;
  st.original_boxes = scene.boxes.size();
  for (const KittiClass c : {KittiClass::Car, KittiClass::Pedestrian, KittiClass::Cyclist}) {
    const auto & pool = db.of(c);
    const std::size_t want = std::min(cfg.sample_counts[index_of(c)], pool.size());
    if (want == 0) {
      continue;
    }
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < want; ++k) {
      std::swap(order[k], order[k + rng.below(pool.size() - k)]);
      const GtEntry & cand = pool[order[k]];
      if (collides(cand.box, scene.boxes)) {
        ++st.rejected;
        continue;
      }
      scene.boxes.push_back(cand.box);
      scene.points.insert(scene.points.end(), cand.points.begin(), cand.points.end());
      ++st.placed;
      st.placed_points += cand.points.size();
    }
  }
  return scene;
}

// --- Global transforms -----------------------------------------------------

/// Mirror about the x-z plane.
inline Scene flip_x(Scene scene)
{
  for (auto & p : scene.points) {
    p[1] = -p[1];
  }
  for (auto & b : scene.boxes) {
    b.y = -b.y;
    b.yaw = geometry::normalize_angle(-b.yaw);
  }
  return scene;
}

inline Scene global_flip_x(Scene scene, const AugmentConfig & cfg, Rng & rng, AugmentStats * stats = nullptr)
{
  const bool flip = rng.bernoulli(cfg.flip_probability);
  if (stats != nullptr) {
    stats->flipped = flip;
  }
  return flip ? flip_x(std::move(scene)) : scene;
}

/// Rotation about the z-axis through the origin.
inline Scene rotate_z(Scene scene, double angle)
{
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (auto & p : scene.points) {
    const double x = p[0];
    const double y = p[1];
    p[0] = static_cast<float>(c * x - s * y);
    p[1] = static_cast<float>(s * x + c * y);
  }
  for (auto & b : scene.boxes) {
    const double x = b.x;
    const double y = b.y;
    b.x = c * x - s * y;
    b.y = s * x + c * y;
    b.yaw = geometry::normalize_angle(b.yaw + angle);
  }
  return scene;
}

inline Scene global_rotate(Scene scene, const AugmentConfig & cfg, Rng & rng, AugmentStats * stats = nullptr)
{
  const double angle = rng.uniform(cfg.rotation_min, cfg.rotation_max);
  if (stats != nullptr) {
    stats->rotation = angle;
  }
  return rotate_z(std::move(scene), angle);
}

inline Scene scale(Scene scene, double factor)
{
  if (!(factor > 0.0)) {
    throw InvalidConfig("scale factor must be positive");
  }
  for (auto & p : scene.points) {
    p[0] = static_cast<float>(p[0] * factor);
    p[1] = static_cast<float>(p[1] * factor);
    p[2] = static_cast<float>(p[2] * factor);
  }
  for (auto & b : scene.boxes) {
    b.x *= factor;
    b.y *= factor;
    b.z *= factor;
    b.w *= factor;
    b.h *= factor;
    b.l *= factor;
  }
  return scene;
}

inline Scene global_scale(Scene scene, const AugmentConfig & cfg, Rng & rng, AugmentStats * stats = nullptr)
{
  const double factor = rng.uniform(cfg.scale_min, cfg.scale_max);
  if (stats != nullptr) {
    stats->scale = factor;
  }
  return scale(std::move(scene), factor);
}

// --- Per-box noise ---------------------------------------------------------

/// Carries a point rigidly from box `from` to box `to` (same box-frame coordinates).
inline Eigen::Vector3d move_with_box(const Eigen::Vector3d & p, const Box3D & from, const Box3D & to)
{
  return geometry::from_box_frame(geometry::to_box_frame(p, from), to);
}

/// Rotates each box about its own center and translates it, carrying its interior points.
/// A perturbation that makes the box overlap any other box is reverted.
inline Scene per_box_augment(Scene scene, const AugmentConfig & cfg, Rng & rng, AugmentStats * stats = nullptr)
{
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    // Draw unconditionally so the stream does not depend on earlier outcomes.
    const double dyaw = rng.uniform(-cfg.box_rotation, cfg.box_rotation);
    const double tx = cfg.box_translation_sigma * rng.normal();
    const double ty = cfg.box_translation_sigma * rng.normal();
    const double tz = cfg.box_translation_sigma * rng.normal();

    const Box3D old = scene.boxes[i];
    Box3D moved = old;
    moved.x += tx;
    moved.y += ty;
    moved.z += tz;
    moved.yaw = geometry::normalize_angle(old.yaw + dyaw);
    if (moved.x == old.x && moved.y == old.y && moved.z == old.z && moved.yaw == old.yaw) {
      continue;
    }

    bool hit = false;
    for (std::size_t j = 0; j < scene.boxes.size() && !hit; ++j) {
      hit = j != i && geometry::bev_iou(moved, scene.boxes[j]) > 0.0;
    }
    if (hit) {
      if (stats != nullptr) {
        ++stats->reverted;
      }
      continue;
    }
    for (const auto k : points_in_box(scene.points, old)) {
      set_xyz(scene.points[k], move_with_box(xyz(scene.points[k]), old, moved));
    }
    scene.boxes[i] = moved;
  }
  return scene;
}

/// Database sampling, per-box noise, flip, rotation and scaling, in that order.
inline Scene augment(Scene scene, const GtDatabase & db, const AugmentConfig & cfg, Rng & rng, AugmentStats * stats = nullptr)
{
  cfg.validate();
  scene = sample_gt(db, std::move(scene), cfg, rng, stats);
  scene = per_box_augment(std::move(scene), cfg, rng, stats);
  scene = global_flip_x(std::move(scene), cfg, rng, stats);
  scene = global_rotate(std::move(scene), cfg, rng, stats);
  return global_scale(std::move(scene), cfg, rng, stats);
}

}  // namespace semfuse::augmentation

#endif  // SEMFUSE__AUGMENTATION_HPP_
