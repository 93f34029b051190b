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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "semfuse/augmentation.hpp"
#include "semfuse/config.hpp"
#include "semfuse/geometry.hpp"
#include "semfuse/testing/synthetic.hpp"

namespace
{

using namespace semfuse;
using namespace semfuse::augmentation;

Box3D car_at(double x, double y, double yaw = 0.0)
{
  Box3D b;
  b.x = x;
  b.y = y;
  b.z = -0.25;
  b.w = 1.6;
  b.h = 1.5;
  b.l = 3.9;
  b.yaw = yaw;
  b.cls = KittiClass::Car;
  return b;
}

FusedPoint car_point(double x, double y, double z) { return {float(x), float(y), float(z), 0.5F, 0, 1, 0, 0}; }

bool same_bytes(const FusedPointCloud & a, const FusedPointCloud & b)
{
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(FusedPoint)) == 0;
}

void expect_pairwise_disjoint(const std::vector<Box3D> & boxes)
{
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) EXPECT_EQ(geometry::bev_iou(boxes[i], boxes[j]), 0.0) << i << "," << j;
}

// --- database ------------------------------------------------------------------

TEST(GtDatabase, CropsInteriorPoints)
{
  GtFrame f{"000001", {}};
  f.scene.boxes = {car_at(10, 0), car_at(30, 5)};
  Rng rng(2);
  for (int i = 0; i < 50; ++i) f.scene.points.push_back(car_point(10 + rng.uniform(-1.5, 1.5), rng.uniform(-0.5, 0.5), -0.25));
  for (int i = 0; i < 20; ++i) f.scene.points.push_back(car_point(20, rng.uniform(-5, 5), 0));
  const auto db = build_gt_database(std::span<const GtFrame>(&f, 1));
  ASSERT_EQ(db.of(KittiClass::Car).size(), 2U);
  EXPECT_EQ(db.of(KittiClass::Car)[0].points.size(), 50U);
  EXPECT_EQ(db.of(KittiClass::Car)[1].points.size(), 0U);  // empty boxes are kept
  EXPECT_EQ(db.of(KittiClass::Car)[0].frame_id, "000001");
}

TEST(GtDatabase, StoredPointsSatisfyInBoxInvariant)
{
  Rng rng(11);
  std::vector<GtFrame> frames;
  for (int i = 0; i < 20; ++i) frames.push_back({std::to_string(i), semfuse::testing::random_scene(rng, 8, 1000)});
  const auto db = build_gt_database(frames);
  std::size_t checked = 0;
  for (const auto & pool : db.entries)
    for (const auto & e : pool)
      for (const auto & p : e.points) {
        const Eigen::Vector3d q = geometry::to_box_frame(xyz(p), e.box);
        EXPECT_LE(std::abs(q.x()), e.box.l / 2 + 1e-6);
        EXPECT_LE(std::abs(q.y()), e.box.w / 2 + 1e-6);
        EXPECT_LE(std::abs(q.z()), e.box.h / 2 + 1e-6);
        ++checked;
      }
  EXPECT_GT(checked, 0U);
}

// --- sampling ------------------------------------------------------------------

GtDatabase two_car_db()
{
  GtDatabase db;
  db.entries[index_of(KittiClass::Car)] = {{car_at(10, -10), {car_point(10, -10, 0)}, "a"},
                                           {car_at(40, 10), {car_point(40, 10, 0), car_point(40.5, 10, 0)}, "b"}};
  return db;
}

TEST(SampleGt, FarApartCarsAreBothPlaced)
{
  AugmentConfig cfg;
  cfg.sample_counts = {0, 2, 0, 0};
  Rng rng(1);
  AugmentStats st;
  const auto out = sample_gt(two_car_db(), Scene{}, cfg, rng, &st);
  EXPECT_EQ(st.placed, 2U);
  EXPECT_EQ(st.rejected, 0U);
  EXPECT_EQ(out.boxes.size(), 2U);
  EXPECT_EQ(out.points.size(), 3U);
  EXPECT_EQ(st.placed_points, 3U);
}

TEST(SampleGt, SampleEqualToExistingBoxIsRejected)
{
  AugmentConfig cfg;
  cfg.sample_counts = {0, 2, 0, 0};
  Scene s;
  s.boxes = {car_at(10, -10)};
  s.points = {car_point(0, 0, 0)};
  Rng rng(1);
  AugmentStats st;
  const auto out = sample_gt(two_car_db(), s, cfg, rng, &st);
  EXPECT_EQ(st.placed, 1U);
  EXPECT_EQ(st.rejected, 1U);
  EXPECT_EQ(out.points.size(), 1U + 2U);
  EXPECT_EQ(out.boxes[1].x, 40.0);
}

TEST(SampleGt, PlacedSamplesArePairwiseDisjoint)
{
  Rng data(4);
  std::vector<GtFrame> frames;
  for (int i = 0; i < 30; ++i) frames.push_back({std::to_string(i), semfuse::testing::random_scene(data, 8, 200)});
  const auto db = build_gt_database(frames);
  AugmentConfig cfg;
  std::size_t rejected = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto rng = Rng::for_frame(seed, "scene");
    const Scene in = semfuse::testing::random_scene(rng, 6, 500);
    AugmentStats st;
    const auto out = sample_gt(db, in, cfg, rng, &st);
    expect_pairwise_disjoint(out.boxes);
    EXPECT_EQ(out.points.size(), in.points.size() + st.placed_points);
    EXPECT_EQ(out.boxes.size(), in.boxes.size() + st.placed);
    rejected += st.rejected;
  }
  EXPECT_GT(rejected, 0U);
}

// --- global transforms ---------------------------------------------------------

TEST(GlobalFlip, MirrorsPointsAndYaw)
{
  Scene s;
  s.points = {car_point(1, 2, 3)};
  s.boxes = {car_at(5, 1, std::numbers::pi / 4)};
  const auto f = flip_x(s);
  EXPECT_EQ(f.points[0][0], 1.0F);
  EXPECT_EQ(f.points[0][1], -2.0F);
  EXPECT_EQ(f.points[0][2], 3.0F);
  EXPECT_DOUBLE_EQ(f.boxes[0].yaw, -std::numbers::pi / 4);
  EXPECT_DOUBLE_EQ(f.boxes[0].y, -1.0);
}

TEST(GlobalFlip, IsAnInvolution)
{
  Rng rng(8);
  const Scene s = semfuse::testing::random_scene(rng);
  const Scene ff = flip_x(flip_x(s));
  EXPECT_TRUE(same_bytes(ff.points, s.points));
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    EXPECT_EQ(ff.boxes[i].y, s.boxes[i].y);
    EXPECT_NEAR(geometry::normalize_angle(ff.boxes[i].yaw - s.boxes[i].yaw), 0.0, 1e-15);
  }
}

TEST(GlobalFlip, ProbabilityEndpoints)
{
  Rng rng(3);
  const Scene s = semfuse::testing::random_scene(rng);
  AugmentConfig cfg;
  cfg.flip_probability = 0.0;
  EXPECT_TRUE(same_bytes(global_flip_x(s, cfg, rng).points, s.points));
  cfg.flip_probability = 1.0;
  AugmentStats st;
  EXPECT_TRUE(same_bytes(global_flip_x(s, cfg, rng, &st).points, flip_x(s).points));
  EXPECT_TRUE(st.flipped);
}

TEST(GlobalRotate, QuarterTurn)
{
  Scene s;
  s.points = {car_point(1, 0, 0)};
  s.boxes = {car_at(2, 0, 0.1)};
  const auto r = rotate_z(s, std::numbers::pi / 2);
  EXPECT_NEAR(r.points[0][0], 0.0, 1e-7);
  EXPECT_NEAR(r.points[0][1], 1.0, 1e-7);
  EXPECT_NEAR(r.boxes[0].x, 0.0, 1e-15);
  EXPECT_NEAR(r.boxes[0].y, 2.0, 1e-15);
  EXPECT_NEAR(r.boxes[0].yaw, 0.1 + std::numbers::pi / 2, 1e-15);
}

TEST(GlobalRotate, ZeroAngleIsIdentity)
{
  Rng rng(12);
  const Scene s = semfuse::testing::random_scene(rng);
  const auto r = rotate_z(s, 0.0);
  EXPECT_TRUE(same_bytes(r.points, s.points));
}

TEST(GlobalRotate, PreservesDistanceToOrigin)
{
  AugmentConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Scene s = semfuse::testing::random_scene(rng);
    AugmentStats st;
    const auto r = global_rotate(s, cfg, rng, &st);
    EXPECT_GE(st.rotation, cfg.rotation_min);
    EXPECT_LE(st.rotation, cfg.rotation_max);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const double a = xyz(s.points[i]).norm(), b = xyz(r.points[i]).norm();
      // coordinates are stored as float
      EXPECT_LE(std::abs(a - b), 1e-6 * std::max(1.0, a));
      EXPECT_EQ(std::memcmp(&s.points[i][3], &r.points[i][3], 5 * sizeof(float)), 0);
    }
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
      EXPECT_NEAR(std::hypot(s.boxes[i].x, s.boxes[i].y), std::hypot(r.boxes[i].x, r.boxes[i].y), 1e-9);
    }
  }
}

TEST(GlobalScale, UnitCubeVolume)
{
  Scene s;
  s.boxes = {Box3D{}};
  const auto r = scale(s, 1.05);
  EXPECT_NEAR(r.boxes[0].volume(), 1.157625, 1e-12);
  EXPECT_THROW(scale(s, 0.0), InvalidConfig);
}

TEST(GlobalScale, UnitFactorIsIdentityAndSemanticsUntouched)
{
  Rng rng(13);
  const Scene s = semfuse::testing::random_scene(rng);
  EXPECT_TRUE(same_bytes(scale(s, 1.0).points, s.points));
  const auto r = scale(s, 0.97);
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    EXPECT_EQ(std::memcmp(&s.points[i][3], &r.points[i][3], 5 * sizeof(float)), 0);
  }
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    EXPECT_EQ(r.boxes[i].yaw, s.boxes[i].yaw);
    EXPECT_NEAR(r.boxes[i].volume(), s.boxes[i].volume() * std::pow(0.97, 3), 1e-12);
  }
}

// --- per-box noise ---------------------------------------------------------------

TEST(PerBox, SingleBoxIsNeverReverted)
{
  AugmentConfig cfg;
  cfg.box_translation_sigma = 3.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Scene s;
    s.boxes = {car_at(10, 0)};
    Rng rng(seed);
    AugmentStats st;
    per_box_augment(s, cfg, rng, &st);
    EXPECT_EQ(st.reverted, 0U);
  }
}

TEST(PerBox, AbuttingBoxesRevertAndStayDisjoint)
{
  AugmentConfig cfg;
  cfg.box_translation_sigma = 1.0;
  std::size_t reverted = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Scene s;
    // side by side, touching along y = 0.8
    s.boxes = {car_at(10, 0), car_at(10, 1.6)};
    Rng rng(seed);
    AugmentStats st;
    const auto out = per_box_augment(s, cfg, rng, &st);
    expect_pairwise_disjoint(out.boxes);
    reverted += st.reverted;
  }
  EXPECT_GT(reverted, 0U);
}

TEST(PerBox, MoveWithBoxIsRigid)
{
  Rng rng(21);
  for (int i = 0; i < 1000; ++i) {
    const Box3D from = semfuse::testing::random_box(rng, 30);
    Box3D to = from;
    to.x += rng.normal();
    to.y += rng.normal();
    to.yaw += rng.uniform(-0.3, 0.3);
    const Eigen::Vector3d p(from.x + rng.uniform(-1, 1), from.y + rng.uniform(-1, 1), from.z + rng.uniform(-0.5, 0.5));
    const Eigen::Vector3d q = move_with_box(p, from, to);
    EXPECT_NEAR((p - Eigen::Vector3d(from.x, from.y, from.z)).norm(), (q - Eigen::Vector3d(to.x, to.y, to.z)).norm(), 1e-9);
    EXPECT_LT((geometry::to_box_frame(p, from) - geometry::to_box_frame(q, to)).norm(), 1e-9);
  }
}

TEST(PerBox, InteriorPointsFollowTheirBox)
{
  AugmentConfig cfg;
  Rng rng(5);
  const Scene s = semfuse::testing::random_scene(rng, 6, 500);
  AugmentStats st;
  const auto out = per_box_augment(s, cfg, rng, &st);
  for (std::size_t b = 0; b < s.boxes.size(); ++b) {
    for (const auto k : points_in_box(s.points, s.boxes[b])) {
      const Eigen::Vector3d before = geometry::to_box_frame(xyz(s.points[k]), s.boxes[b]);
      const Eigen::Vector3d after = geometry::to_box_frame(xyz(out.points[k]), out.boxes[b]);
      EXPECT_LT((before - after).norm(), 1e-4);  // float storage
    }
  }
}

// --- full pipeline -------------------------------------------------------------------

TEST(Augment, IdentityConfigIsBytePassthrough)
{
  Rng rng(6);
  const Scene s = semfuse::testing::random_scene(rng);
  const auto db = build_gt_database(std::vector<GtFrame>{{"x", s}});
  const auto out = augment(s, db, config::identity_augment_config(), rng);
  EXPECT_TRUE(same_bytes(out.points, s.points));
  ASSERT_EQ(out.boxes.size(), s.boxes.size());
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    EXPECT_EQ(out.boxes[i].x, s.boxes[i].x);
    EXPECT_EQ(out.boxes[i].yaw, s.boxes[i].yaw);
  }
}

TEST(Augment, SameSeedSameBytes)
{
  Rng data(14);
  std::vector<GtFrame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back({std::to_string(i), semfuse::testing::random_scene(data)});
  const auto db = build_gt_database(frames);
  const Scene s = semfuse::testing::random_scene(data);
  auto r1 = Rng::for_frame(99, "000123");
  auto r2 = Rng::for_frame(99, "000123");
  auto r3 = Rng::for_frame(100, "000123");
  const auto a = augment(s, db, AugmentConfig{}, r1);
  const auto b = augment(s, db, AugmentConfig{}, r2);
  const auto c = augment(s, db, AugmentConfig{}, r3);
  EXPECT_TRUE(same_bytes(a.points, b.points));
  EXPECT_FALSE(same_bytes(a.points, c.points));
}

TEST(Augment, RejectsBadConfig)
{
  AugmentConfig cfg;
  cfg.flip_probability = 1.5;
  Rng rng(0);
  EXPECT_THROW(augment({}, {}, cfg, rng), InvalidConfig);
  cfg = {};
  cfg.scale_min = 2.0;
  EXPECT_THROW(augment({}, {}, cfg, rng), InvalidConfig);
}

}  // namespace
