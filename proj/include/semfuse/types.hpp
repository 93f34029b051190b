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

#ifndef SEMFUSE__TYPES_HPP_
#define SEMFUSE__TYPES_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace semfuse
{

/// One raw LiDAR return: metric coordinates and reflectance in [0, 1].
struct Point
{
  float x = 0.0F;
  float y = 0.0F;
  float z = 0.0F;
  float r = 0.0F;

  friend bool operator==(const Point &, const Point &) = default;
};

using PointCloud = std::vector<Point>;

/// Detection class vocabulary. The numeric value is the one-hot slot.
enum class KittiClass : std::uint8_t { Unlabeled = 0, Car = 1, Pedestrian = 2, Cyclist = 3 };

inline constexpr std::size_t kNumKittiClasses = 4;

/// Fused point layout: x, y, z, r, s0, s1, s2, s3.
inline constexpr std::size_t kFusedWidth = 8;
inline constexpr std::size_t kGeometryWidth = 4;

using FusedPoint = std::array<float, kFusedWidth>;
using FusedPointCloud = std::vector<FusedPoint>;

struct SemanticLabel
{
  std::uint16_t semantic_id = 0;
  std::uint16_t instance_id = 0;

  friend bool operator==(const SemanticLabel &, const SemanticLabel &) = default;
};

using SemanticLabelMap = std::vector<SemanticLabel>;

/// Per-point class scores (logits or probabilities) in one-hot slot order.
using ClassScores = std::array<float, kNumKittiClasses>;
using ClassScoreMap = std::vector<ClassScores>;

/// Oriented box in the LiDAR frame (z-up, yaw from +x, z at the geometric center).
/// `l` runs along the heading, `w` across it, `h` is vertical.
struct Box3D
{
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 1.0;
  double h = 1.0;
  double l = 1.0;
  double yaw = 0.0;
  KittiClass cls = KittiClass::Unlabeled;
  std::optional<double> score;

  double volume() const { return w * h * l; }
};

constexpr std::string_view class_name(KittiClass c)
{
  switch (c) {
    case KittiClass::Car:
      return "Car";
    case KittiClass::Pedestrian:
      return "Pedestrian";
    case KittiClass::Cyclist:
      return "Cyclist";
    case KittiClass::Unlabeled:
      break;
  }
  return "Unlabeled";
}

inline std::optional<KittiClass> class_from_name(std::string_view name)
{
  if (name == "Car") return KittiClass::Car;
  if (name == "Pedestrian") return KittiClass::Pedestrian;
  if (name == "Cyclist") return KittiClass::Cyclist;
  if (name == "Unlabeled") return KittiClass::Unlabeled;
  return std::nullopt;
}

constexpr std::size_t index_of(KittiClass c) { return static_cast<std::size_t>(c); }

}  // namespace semfuse

#endif  // SEMFUSE__TYPES_HPP_
