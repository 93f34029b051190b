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
#include <map>
#include <numbers>
#include <numeric>

#include "semfuse/encoders.hpp"
#include "semfuse/testing/synthetic.hpp"

namespace
{

using namespace semfuse;
using namespace semfuse::encoders;

FusedPoint car_point(float x, float y, float z, float r) { return {x, y, z, r, 0, 1, 0, 0}; }

// --- config ------------------------------------------------------------------

TEST(GridConfig, DefaultsAreValidAndGridSizesExact)
{
  const GridConfig g;
  EXPECT_NO_THROW(g.validate());
  EXPECT_EQ(detail::cell_count(g.pillar.x, g.pillar.resolution_x), 432);
  EXPECT_EQ(detail::cell_count(g.pillar.y, g.pillar.resolution_y), 496);
  EXPECT_EQ(detail::cell_count(g.voxel.x, g.voxel.size_x), 1408);
  EXPECT_EQ(detail::cell_count(g.voxel.z, g.voxel.size_z), 40);
}

TEST(GridConfig, RejectsDegenerateRangesAndResolutions)
{
  GridConfig g;
  g.pillar.resolution_x = 0.0;
  EXPECT_THROW(g.validate(), InvalidConfig);
  g = {};
  g.voxel.z = {1.0, 1.0};
  EXPECT_THROW(g.validate(), InvalidConfig);
  g = {};
  g.pillar.max_points = 0;
  EXPECT_THROW(pillarize({}, g), InvalidConfig);
  g = {};
  g.cylinder.phi_bins = 0;
  EXPECT_THROW(cyl_partition({}, g), InvalidConfig);
}

TEST(CellIndex, HalfOpenCells)
{
  EXPECT_EQ(detail::cell_index(0.0, 0.0, 0.16, 10), 0);
  EXPECT_EQ(detail::cell_index(0.16, 0.0, 0.16, 10), 1);
  EXPECT_EQ(detail::cell_index(0.1599999, 0.0, 0.16, 10), 0);
  EXPECT_EQ(detail::cell_index(1.6, 0.0, 0.16, 10), std::nullopt);
  EXPECT_EQ(detail::cell_index(-1e-12, 0.0, 0.16, 10), std::nullopt);
  // boundaries on the corner grid never round into the previous cell
  for (int i = 0; i < 432; ++i) {
    EXPECT_EQ(detail::cell_index(0.0 + i * 0.16, 0.0, 0.16, 432), i);
  }
}

// --- pillars -------------------------------------------------------------------

TEST(Pillarize, SinglePointFeatures)
{
  const auto t = pillarize({car_point(0.1F, 0.1F, -1.0F, 0.5F)}, GridConfig{});
  ASSERT_EQ(t.num_pillars, 1U);
  EXPECT_EQ(t.num_features, 13U);
  EXPECT_EQ(t.coords[0][0], 0);
  EXPECT_EQ(t.coords[0][1], 248);  // y range starts at -39.68
  EXPECT_EQ(t.counts[0], 1U);
  const float expect[13] = {0.1F, 0.1F, -1.0F, 0.5F, 0, 0, 0, 0.02F, 0, 0, 1, 0, 0};
  for (std::size_t d = 0; d < 13; ++d) {
    if (d == 8) continue;  // y center offset depends on the y origin, checked below
    EXPECT_NEAR(t.at(d, 0, 0), expect[d], 1e-6) << "feature " << d;
  }
  EXPECT_NEAR(t.at(8, 0, 0), 0.1 - (-39.68 + 248.5 * 0.16), 1e-6);
}

TEST(Pillarize, SinglePointWithGridAtOrigin)
{
  GridConfig g;
  g.pillar.y = {0.0, 40.0};
  const auto t = pillarize({car_point(0.1F, 0.1F, -1.0F, 0.5F)}, g);
  ASSERT_EQ(t.num_pillars, 1U);
  EXPECT_EQ(t.coords[0], (std::array<std::int32_t, 2>{0, 0}));
  const double expect[13] = {0.1, 0.1, -1, 0.5, 0, 0, 0, 0.02, 0.02, 0, 1, 0, 0};
  for (std::size_t d = 0; d < 13; ++d) EXPECT_NEAR(t.at(d, 0, 0), expect[d], 1e-6) << "feature " << d;
}

TEST(Pillarize, EmptyCloud)
{
  const auto t = pillarize({}, GridConfig{});
  EXPECT_EQ(t.num_pillars, 0U);
  EXPECT_TRUE(t.data.empty());
  EXPECT_EQ(t.dropped(), 0U);
}

TEST(Pillarize, OverfullPillarIsSubsampledToCap)
{
  GridConfig g;
  g.pillar.max_points = 5;
  FusedPointCloud pts;
  for (int i = 0; i < 8; ++i) pts.push_back(car_point(1.0F + 0.01F * i, 0.05F, -1.0F + 0.1F * i, 0.1F * i));
  const auto t = pillarize(pts, g);
  ASSERT_EQ(t.num_pillars, 1U);
  EXPECT_EQ(t.counts[0], 5U);
  EXPECT_EQ(t.dropped_subsampled, 3U);
  EXPECT_EQ(t.retained() + t.dropped(), pts.size());
  // kept points are in input order and the mean offsets sum to zero over them
  double sx = 0;
  for (std::size_t n = 0; n < 5; ++n) {
    if (n > 0) {
      EXPECT_GT(t.source_index[n], t.source_index[n - 1]);
    }
    sx += t.at(4, 0, n);
  }
  EXPECT_NEAR(sx, 0.0, 1e-5);
}

TEST(Pillarize, OutOfRangeAndCapacityDrops)
{
  GridConfig g;
  g.pillar.max_pillars = 2;
  const FusedPointCloud pts{car_point(-1, 0, 0, 0), car_point(1, 0, 0, 0), car_point(5, 0, 0, 0),
                            car_point(9, 0, 0, 0), car_point(1.01F, 0, 0, 0), car_point(80, 0, 0, 0)};
  const auto t = pillarize(pts, g);
  EXPECT_EQ(t.num_pillars, 2U);
  EXPECT_EQ(t.dropped_out_of_range, 2U);
  EXPECT_EQ(t.dropped_capacity, 1U);
  EXPECT_EQ(t.counts[0], 2U);  // first-occurrence order: cell of x=1 first
  EXPECT_EQ(t.retained() + t.dropped(), pts.size());
}

TEST(Pillarize, MeanOffsetsOfTwoPoints)
{
  const auto t = pillarize({car_point(1.0F, 0.05F, -1.0F, 0), car_point(1.1F, 0.05F, 0.0F, 0)}, GridConfig{});
  ASSERT_EQ(t.num_pillars, 1U);
  EXPECT_NEAR(t.at(4, 0, 0), -0.05, 1e-6);
  EXPECT_NEAR(t.at(4, 0, 1), 0.05, 1e-6);
  EXPECT_NEAR(t.at(6, 0, 0), -0.5, 1e-6);
  EXPECT_NEAR(t.at(6, 0, 1), 0.5, 1e-6);
}

TEST(Pillarize, SeedDeterminismAndSeedSensitivity)
{
  Rng rng(1);
  const auto pts = semfuse::testing::clustered_fused(5000, rng);
  GridConfig g;
  g.pillar.max_points = 4;
  Rng a(77), b(77), c(78);
  const auto ta = pillarize(pts, g, a);
  const auto tb = pillarize(pts, g, b);
  const auto tc = pillarize(pts, g, c);
  ASSERT_GT(ta.dropped_subsampled, 0U);
  EXPECT_EQ(ta.data, tb.data);
  EXPECT_EQ(ta.source_index, tb.source_index);
  EXPECT_NE(ta.source_index, tc.source_index);
}

// --- pseudo-image --------------------------------------------------------------

TEST(PseudoImage, SinglePillarLandsAtItsCell)
{
  GridConfig g;
  const float x = static_cast<float>(4 * 0.16 + 0.05);
  const float y = static_cast<float>(-39.68 + 3 * 0.16 + 0.05);
  const auto t = pillarize({car_point(x, y, -1.0F, 0.5F)}, g);
  ASSERT_EQ(t.coords[0], (std::array<std::int32_t, 2>{4, 3}));
  const auto img = scatter_to_pseudo_image(t, 13, g);
  EXPECT_EQ(img.height, 496U);
  EXPECT_EQ(img.width, 432U);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t r = 0; r < img.height; ++r)
      for (std::size_t q = 0; q < img.width; ++q) {
        if (r != 3 || q != 4) {
          ASSERT_EQ(img.at(c, r, q), 0.0F);
        }
      }
  EXPECT_EQ(img.at(0, 3, 4), x);
  EXPECT_EQ(img.at(10, 3, 4), 1.0F);
}

TEST(PseudoImage, ZeroPillarsGiveZeroCanvas)
{
  const auto img = scatter_to_pseudo_image(pillarize({}, GridConfig{}), 8, GridConfig{});
  EXPECT_EQ(img.data.size(), 8U * 496U * 432U);
  EXPECT_TRUE(std::all_of(img.data.begin(), img.data.end(), [](float v) { return v == 0.0F; }));
}

TEST(PseudoImage, SumEqualsSumOfPooledVectors)
{
  Rng rng(5);
  const GridConfig g;
  const auto t = pillarize(semfuse::testing::random_fused(20000, rng), g, rng);
  const auto img = scatter_to_pseudo_image(t, 13, g);
  double pooled = 0.0;
  for (std::size_t p = 0; p < t.num_pillars; ++p) {
    for (std::size_t c = 0; c < 13; ++c) {
      float m = -std::numeric_limits<float>::infinity();
      for (std::size_t n = 0; n < t.counts[p]; ++n) m = std::max(m, t.at(c, p, n));
      pooled += m;
    }
  }
  const double canvas = std::accumulate(img.data.begin(), img.data.end(), 0.0);
  EXPECT_NEAR(canvas, pooled, 1e-6 * std::max(1.0, std::abs(pooled)));
}

TEST(PseudoImage, OutOfGridCoordinateThrows)
{
  auto t = pillarize({car_point(1, 0, 0, 0)}, GridConfig{});
  t.coords[0] = {500, 0};
  EXPECT_THROW(scatter_to_pseudo_image(t, 4, GridConfig{}), CoordOutOfRange);
  EXPECT_THROW(scatter_to_pseudo_image(t, 14, GridConfig{}), InvalidConfig);
}

// --- voxels --------------------------------------------------------------------

TEST(Voxelize, LocalCoordinates)
{
  GridConfig g;
  g.voxel.x = {0, 1};
  g.voxel.y = {0, 1};
  g.voxel.z = {0, 1};
  g.voxel.size_x = g.voxel.size_y = g.voxel.size_z = 0.1;
  const auto v = voxelize({car_point(0.05F, 0.05F, 0.05F, 0.3F)}, g);
  ASSERT_EQ(v.size(), 1U);
  EXPECT_EQ(v.coords[0], (std::array<std::int32_t, 3>{0, 0, 0}));
  EXPECT_NEAR(v.at(0, 0, 8), 0.05, 1e-7);
  EXPECT_NEAR(v.at(0, 0, 9), 0.05, 1e-7);
  EXPECT_NEAR(v.at(0, 0, 10), 0.05, 1e-7);
  EXPECT_EQ(v.at(0, 0, 3), 0.3F);
  EXPECT_EQ(v.classes[0], KittiClass::Car);
}

TEST(Voxelize, BufferCapacityDrops)
{
  GridConfig g;
  g.voxel.max_voxels = 1;
  const auto v = voxelize({car_point(1, 0, 0, 0), car_point(2, 0, 0, 0)}, g);
  EXPECT_EQ(v.size(), 1U);
  EXPECT_EQ(v.dropped_buffer_full, 1U);
}

TEST(Voxelize, PerClassPointCaps)
{
  GridConfig g;
  g.voxel.max_points = 3;
  g.voxel.class_max_points = {0, 0, 1, 0};  // pedestrians: one point per voxel
  FusedPointCloud pts;
  for (int i = 0; i < 5; ++i) pts.push_back(car_point(1.01F + 0.001F * i, 0.01F, 0.01F, 0));
  for (int i = 0; i < 5; ++i) pts.push_back({2.01F + 0.001F * i, 0.01F, 0.01F, 0, 0, 0, 1, 0});
  const auto v = voxelize(pts, g);
  ASSERT_EQ(v.size(), 2U);
  EXPECT_EQ(v.counts[0], 3U);
  EXPECT_EQ(v.counts[1], 1U);
  EXPECT_EQ(v.dropped_voxel_full, 6U);
  EXPECT_EQ(v.retained() + v.dropped(), pts.size());
}

TEST(Voxelize, StoredPointsLieInTheirVoxel)
{
  Rng rng(9);
  const GridConfig g;
  const auto pts = semfuse::testing::random_fused(30000, rng);
  const auto v = voxelize(pts, g);
  ASSERT_GT(v.size(), 0U);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto lo = voxel_min_corner(g.voxel, v.coords[i]);
    const Eigen::Vector3d size(g.voxel.size_x, g.voxel.size_y, g.voxel.size_z);
    for (std::size_t m = 0; m < v.counts[i]; ++m) {
      for (int a = 0; a < 3; ++a) {
        const double p = v.at(i, m, static_cast<std::size_t>(a));
        EXPECT_GE(p, lo[a]);
        EXPECT_LT(p, lo[a] + size[a] + 1e-12);
      }
    }
  }
  EXPECT_EQ(v.retained() + v.dropped(), pts.size());
}

// --- cylinder ------------------------------------------------------------------

TEST(Cylinder, SeamNeighboursWrap)
{
  const double eps = 1e-6;
  const std::size_t n = 360;
  EXPECT_EQ(phi_bin(std::numbers::pi - eps, n), 359);
  EXPECT_EQ(phi_bin(-std::numbers::pi + eps, n), 0);
  EXPECT_EQ(phi_bin(std::numbers::pi, n), 0);  // wraps, never out of range
  const auto g = cyl_partition({car_point(-10.0F, 1e-5F, 0, 0), car_point(-10.0F, -1e-5F, 0, 0)}, GridConfig{});
  ASSERT_EQ(g.cells.size(), 2U);
  const auto a = g.cells[0].phi, b = g.cells[1].phi;
  EXPECT_TRUE((a == 359 && b == 0) || (a == 0 && b == 359) || a == b);
}

TEST(Cylinder, OutOfRangeRhoAndZAreCounted)
{
  GridConfig g;
  g.cylinder.rho = {2.0, 50.0};
  const auto c = cyl_partition({car_point(1, 0, 0, 0), car_point(10, 0, 0, 0), car_point(60, 0, 0, 0),
                                car_point(10, 0, 5, 0)},
                               g);
  EXPECT_EQ(c.point_index, (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(c.dropped_rho, 2U);
  EXPECT_EQ(c.dropped_z, 1U);
  EXPECT_EQ(c.population(c.cells[0]), 1U);
}

TEST(Cylinder, CellFormula)
{
  const GridConfig g;
  const auto c = cyl_partition({car_point(3, 4, 0.5F, 0)}, g);
  ASSERT_EQ(c.cells.size(), 1U);
  const double phi = std::atan2(4.0, 3.0);
  EXPECT_EQ(c.cells[0].rho, static_cast<int>(std::floor(5.0 / (50.0 / 480.0))));
  EXPECT_EQ(c.cells[0].phi, static_cast<int>(std::floor((phi + std::numbers::pi) / (2 * std::numbers::pi / 360))));
  EXPECT_EQ(c.cells[0].z, static_cast<int>(std::floor((0.5 + 4.0) / (6.0 / 32.0))));
}

TEST(Cylinder, MoreUniformThanCartesianOnInverseRadiusDensity)
{
  // Areal density ~ 1/rho is uniform in rho: the radial cells see equal expected
  // counts, while Cartesian cells near the sensor are heavily over-populated.
  Rng rng(31);
  FusedPointCloud pts;
  for (int i = 0; i < 200000; ++i) {
    const double rho = rng.uniform(1.0, 40.0);
    const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
    pts.push_back(car_point(static_cast<float>(rho * std::cos(phi)), static_cast<float>(rho * std::sin(phi)), 0, 0));
  }
  GridConfig g;
  g.cylinder.rho = {1.0, 40.0};
  g.cylinder.rho_resolution = 39.0 / 30.0;
  g.cylinder.phi_bins = 60;
  g.cylinder.z = {-1.0, 1.0};
  g.cylinder.z_resolution = 2.0;
  const auto cyl = cyl_partition(pts, g);
  auto cv2 = [](const std::vector<double> & v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (const double x : v) var += (x - mean) * (x - mean);
    return var / static_cast<double>(v.size()) / (mean * mean);
  };
  std::vector<double> cyl_counts(cyl.populations.begin(), cyl.populations.end());
  // Cartesian cells of the same count, restricted to cells fully inside the annulus.
  const double cell = 2.0;
  std::map<std::pair<int, int>, double> cart;
  for (const auto & p : pts) cart[{static_cast<int>(std::floor(p[0] / cell)), static_cast<int>(std::floor(p[1] / cell))}] += 1;
  std::vector<double> cart_counts;
  for (const auto & [key, n] : cart) {
    const double x0 = key.first * cell, y0 = key.second * cell;
    double rmin = 1e9, rmax = 0;
    for (const double cx : {x0, x0 + cell})
      for (const double cy : {y0, y0 + cell}) {
        rmin = std::min(rmin, std::hypot(cx, cy));
        rmax = std::max(rmax, std::hypot(cx, cy));
      }
    if (rmin >= 1.5 && rmax <= 40.0 && !(x0 < 0 && x0 + cell > 0) && !(y0 < 0 && y0 + cell > 0)) cart_counts.push_back(n);
  }
  ASSERT_GT(cart_counts.size(), 100U);
  EXPECT_LT(cv2(cyl_counts) / cv2(cart_counts), 1.0);
}

// --- bins and anchors ------------------------------------------------------------

TEST(Bins, CenteredTargetIsMiddleBin)
{
  const BinConfig bc;
  const auto t = bin_encode_center({1.0, 2.0}, {1.0, 2.0}, bc);
  EXPECT_EQ(t.bin_x, 6);
  EXPECT_EQ(t.bin_z, 6);
  EXPECT_DOUBLE_EQ(t.residual_x, -0.5);
  EXPECT_DOUBLE_EQ(t.residual_z, -0.5);
}

TEST(Bins, BoundaryAndOverflow)
{
  const BinConfig bc;
  EXPECT_EQ(bin_encode_center({0, 0}, {3.0 - 1e-9, 0}, bc).bin_x, 11);
  EXPECT_EQ(bin_encode_center({0, 0}, {3.0, 0}, bc).bin_x, 11);
  EXPECT_EQ(bin_encode_center({0, 0}, {-3.0, 0}, bc).bin_x, 0);
  EXPECT_THROW(bin_encode_center({0, 0}, {4.0, 0}, bc), Overflow);
  EXPECT_THROW(bin_encode_center({0, 0}, {0, -4.0}, bc), Overflow);
}

TEST(Bins, DecodeReconstructsTarget)
{
  Rng rng(3);
  const BinConfig bc;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector2d p(rng.uniform(-40, 40), rng.uniform(0, 70));
    const Eigen::Vector2d t = p + Eigen::Vector2d(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const auto e = bin_encode_center(p, t, bc);
    EXPECT_GE(e.residual_x, -0.5 - 1e-9);
    EXPECT_LE(e.residual_x, 0.5 + 1e-9);
    EXPECT_LT((bin_decode_center(p, e, bc) - t).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Anchors, IdentityAndLogRatio)
{
  Box3D a;
  a.x = 10;
  a.y = 2;
  a.z = -1;
  a.w = 1.6;
  a.h = 1.56;
  a.l = 3.9;
  a.yaw = 0.3;
  for (const double v : anchor_residual_encode(a, a)) EXPECT_EQ(v, 0.0);
  Box3D g = a;
  g.w *= 2;
  EXPECT_NEAR(anchor_residual_encode(g, a)[3], std::log(2.0), 1e-15);
  Box3D bad = a;
  bad.w = bad.l = 0;
  EXPECT_THROW(anchor_residual_encode(a, bad), DegenerateAnchor);
}

TEST(Anchors, RoundTripWithinHalfTurn)
{
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const auto a = semfuse::testing::random_box(rng, 40);
    auto g = semfuse::testing::random_box(rng, 40);
    g.yaw = geometry::normalize_angle(a.yaw + rng.uniform(-1.4, 1.4));
    const auto d = anchor_residual_decode(anchor_residual_encode(g, a), a);
    EXPECT_NEAR(d.x, g.x, 1e-6);
    EXPECT_NEAR(d.y, g.y, 1e-6);
    EXPECT_NEAR(d.z, g.z, 1e-6);
    EXPECT_NEAR(d.w, g.w, 1e-6);
    EXPECT_NEAR(d.h, g.h, 1e-6);
    EXPECT_NEAR(d.l, g.l, 1e-6);
    EXPECT_NEAR(geometry::normalize_angle(d.yaw - g.yaw), 0.0, 1e-6);
  }
}

}  // namespace
