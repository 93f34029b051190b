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

#ifndef SEMFUSE__ENCODERS_HPP_
#define SEMFUSE__ENCODERS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "semfuse/errors.hpp"
#include "semfuse/geometry.hpp"
#include "semfuse/rng.hpp"
#include "semfuse/semantic_fusion.hpp"
#include "semfuse/types.hpp"

namespace semfuse::encoders
{

struct AxisRange
{
  double min = 0.0;
  double max = 0.0;
};

struct PillarConfig
{
  AxisRange x{0.0, 69.12};
  AxisRange y{-39.68, 39.68};
  double resolution_x = 0.16;
  double resolution_y = 0.16;
  std::size_t max_pillars = 12000;
  std::size_t max_points = 100;
};

struct VoxelConfig
{
  AxisRange x{0.0, 70.4};
  AxisRange y{-40.0, 40.0};
  AxisRange z{-3.0, 1.0};
  double size_x = 0.05;
  double size_y = 0.05;
  double size_z = 0.1;
  std::size_t max_voxels = 16000;
  std::size_t max_points = 5;
  /// Per-class point cap, indexed by KittiClass; 0 falls back to max_points.
  std::array<std::size_t, kNumKittiClasses> class_max_points{};
};

struct CylinderConfig
{
  AxisRange rho{0.0, 50.0};
  AxisRange z{-4.0, 2.0};
  double rho_resolution = 50.0 / 480.0;
  double z_resolution = 6.0 / 32.0;
  std::size_t phi_bins = 360;
};

struct BinConfig
{
  double search_range = 3.0;
  double bin_size = 0.5;
};

struct GridConfig
{
  PillarConfig pillar;
  VoxelConfig voxel;
  CylinderConfig cylinder;
  BinConfig bins;
  std::uint64_t seed = 0;

  void validate() const;
};

namespace detail
{

/// Number of cells covering [min, max) at resolution `res`.
inline std::int64_t cell_count(const AxisRange & r, double res)
{
  const double n = (r.max - r.min) / res;
  const double rounded = std::round(n);
  return static_cast<std::int64_t>(std::abs(n - rounded) < 1e-6 ? rounded : std::ceil(n));
}

/// Half-open cell index of `v`, consistent with the corner grid min + i * res.
inline std::optional<std::int64_t> cell_index(double v, double min, double res, std::int64_t n)
{
  if (!(v >= min)) {
    return std::nullopt;
  }
  auto i = static_cast<std::int64_t>(std::floor((v - min) / res));
  if (v < min + static_cast<double>(i) * res) {
    --i;
  } else if (v >= min + static_cast<double>(i + 1) * res) {
    ++i;
  }
  if (i < 0 || i >= n) {
    return std::nullopt;
  }
  return i;
}

inline void check_range(const AxisRange & r, double res, const char * name)
{
  if (!(r.max > r.min) || !std::isfinite(r.min) || !std::isfinite(r.max)) {
    throw InvalidConfig(std::string(name) + ": degenerate range");
  }
  if (!(res > 0.0) || !std::isfinite(res)) {
    throw InvalidConfig(std::string(name) + ": resolution must be positive");
  }
}

/// Chooses `keep` of `n` indices uniformly without replacement; result sorted.
inline std::vector<std::uint32_t> sample_sorted(std::uint32_t n, std::uint32_t keep, Rng & rng)
{
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0U);
  for (std::uint32_t i = 0; i < keep; ++i) {
    const auto j = i + static_cast<std::uint32_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

inline void GridConfig::validate() const
{
  detail::check_range(pillar.x, pillar.resolution_x, "pillar.x");
  detail::check_range(pillar.y, pillar.resolution_y, "pillar.y");
  if (pillar.max_pillars == 0 || pillar.max_points == 0) {
    throw InvalidConfig("pillar caps must be positive");
  }
  detail::check_range(voxel.x, voxel.size_x, "voxel.x");
  detail::check_range(voxel.y, voxel.size_y, "voxel.y");
  detail::check_range(voxel.z, voxel.size_z, "voxel.z");
  if (voxel.max_voxels == 0 || voxel.max_points == 0) {
    throw InvalidConfig("voxel caps must be positive");
  }
  detail::check_range(cylinder.rho, cylinder.rho_resolution, "cylinder.rho");
  detail::check_range(cylinder.z, cylinder.z_resolution, "cylinder.z");
  if (cylinder.rho.min < 0.0) {
    throw InvalidConfig("cylinder.rho: minimum must be non-negative");
  }
  if (cylinder.phi_bins == 0) {
    throw InvalidConfig("cylinder.phi_bins must be positive");
  }
  if (!(bins.search_range > 0.0) || !(bins.bin_size > 0.0)) {
    throw InvalidConfig("bin search range and size must be positive");
  }
}

// --- Pillars ---------------------------------------------------------------

/// Per-point pillar features: x, y, z, r, xc, yc, zc, xp, yp, s0..s3.
inline constexpr std::size_t kPillarFeatures = 9 + kNumKittiClasses;

struct PillarTensor
{
  std::size_t num_features = kPillarFeatures;  // D
  std::size_t num_pillars = 0;  // P
  std::size_t max_points = 0;  // N
  std::size_t grid_x = 0;
  std::size_t grid_y = 0;
  std::vector<float> data;  // (D, P, N)
  std::vector<std::array<std::int32_t, 2>> coords;  // (ix, iy) per pillar
  std::vector<std::uint32_t> counts;
  std::vector<std::int64_t> source_index;  // (P, N); -1 marks padding

  std::size_t dropped_out_of_range = 0;
  std::size_t dropped_subsampled = 0;
  std::size_t dropped_capacity = 0;

  float at(std::size_t d, std::size_t p, std::size_t n) const
  {
    return data[(d * num_pillars + p) * max_points + n];
  }

  std::size_t retained() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
  std::size_t dropped() const { return dropped_out_of_range + dropped_subsampled + dropped_capacity; }
};

/// Groups points into x-y pillars (first-occurrence order), decorates them and pads to
/// (D, P, N). Pillars holding more than N points keep a uniform random subset.
inline PillarTensor pillarize(const FusedPointCloud & fpc, const GridConfig & cfg, Rng & rng)
{
  cfg.validate();
  const PillarConfig & pc = cfg.pillar;
  const std::int64_t nx = detail::cell_count(pc.x, pc.resolution_x);
  const std::int64_t ny = detail::cell_count(pc.y, pc.resolution_y);

  PillarTensor out;
  out.max_points = pc.max_points;
  out.grid_x = static_cast<std::size_t>(nx);
  out.grid_y = static_cast<std::size_t>(ny);

  std::vector<std::int32_t> cell_to_pillar(static_cast<std::size_t>(nx * ny), -1);
  std::vector<std::int32_t> pillar_of(fpc.size(), -1);
  std::vector<std::uint32_t> members_per_pillar;
  for (std::size_t i = 0; i < fpc.size(); ++i) {
    const auto ix = detail::cell_index(fpc[i][0], pc.x.min, pc.resolution_x, nx);
    const auto iy = detail::cell_index(fpc[i][1], pc.y.min, pc.resolution_y, ny);
    if (!ix || !iy) {
      ++out.dropped_out_of_range;
      continue;
    }
    auto & slot = cell_to_pillar[static_cast<std::size_t>(*iy * nx + *ix)];
    if (slot < 0) {
      if (out.coords.size() >= pc.max_pillars) {
        ++out.dropped_capacity;
        continue;
      }
      slot = static_cast<std::int32_t>(out.coords.size());
      out.coords.push_back({static_cast<std::int32_t>(*ix), static_cast<std::int32_t>(*iy)});
      members_per_pillar.push_back(0);
    }
    pillar_of[i] = slot;
    ++members_per_pillar[static_cast<std::size_t>(slot)];
  }

  // Bucket point indices per pillar, preserving point order.
  const std::size_t num_pillars = out.coords.size();
  std::vector<std::size_t> offsets(num_pillars + 1, 0);
  for (std::size_t p = 0; p < num_pillars; ++p) {
    offsets[p + 1] = offsets[p] + members_per_pillar[p];
  }
  std::vector<std::uint32_t> members(offsets.back());
  {
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t i = 0; i < fpc.size(); ++i) {
      if (pillar_of[i] >= 0) {
        members[cursor[static_cast<std::size_t>(pillar_of[i])]++] = static_cast<std::uint32_t>(i);
      }
    }
  }

  const std::size_t N = pc.max_points;
  const std::size_t D = kPillarFeatures;
  out.num_pillars = num_pillars;
  out.data.assign(D * num_pillars * N, 0.0F);
  out.source_index.assign(num_pillars * N, -1);
  out.counts.resize(num_pillars);

  std::vector<std::uint32_t> kept;
  for (std::size_t p = 0; p < num_pillars; ++p) {
    const auto total = static_cast<std::uint32_t>(members_per_pillar[p]);
    kept.assign(members.begin() + static_cast<std::ptrdiff_t>(offsets[p]),
                members.begin() + static_cast<std::ptrdiff_t>(offsets[p + 1]));
    if (total > N) {
      const auto pick = detail::sample_sorted(total, static_cast<std::uint32_t>(N), rng);
      for (std::size_t k = 0; k < pick.size(); ++k) {
        kept[k] = kept[pick[k]];
      }
      kept.resize(N);
      out.dropped_subsampled += total - N;
    }
    out.counts[p] = static_cast<std::uint32_t>(kept.size());

    double mx = 0.0, my = 0.0, mz = 0.0;
    for (const auto i : kept) {
      mx += fpc[i][0];
      my += fpc[i][1];
      mz += fpc[i][2];
    }
    const auto cnt = static_cast<double>(kept.size());
    mx /= cnt;
    my /= cnt;
    mz /= cnt;
    const double cx = pc.x.min + (out.coords[p][0] + 0.5) * pc.resolution_x;
    const double cy = pc.y.min + (out.coords[p][1] + 0.5) * pc.resolution_y;

    for (std::size_t n = 0; n < kept.size(); ++n) {
      const FusedPoint & f = fpc[kept[n]];
      const std::array<float, kPillarFeatures> feat = {
        f[0], f[1], f[2], f[3],
        static_cast<float>(f[0] - mx), static_cast<float>(f[1] - my), static_cast<float>(f[2] - mz),
        static_cast<float>(f[0] - cx), static_cast<float>(f[1] - cy),
        f[4], f[5], f[6], f[7]};
      for (std::size_t d = 0; d < D; ++d) {
        out.data[(d * num_pillars + p) * N + n] = feat[d];
      }
      out.source_index[p * N + n] = kept[n];
    }
  }
  return out;
}

inline PillarTensor pillarize(const FusedPointCloud & fpc, const GridConfig & cfg)
{
  Rng rng(cfg.seed);
  return pillarize(fpc, cfg, rng);
}

/// Dense (C, H, W) canvas; H runs along grid y, W along grid x.
struct PseudoImage
{
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  float at(std::size_t c, std::size_t row, std::size_t col) const
  {
    return data[(c * height + row) * width + col];
  }
};

/// Max-pools every pillar over its real points and scatters the first C channels into
/// the canvas at (iy, ix).
inline PseudoImage scatter_to_pseudo_image(const PillarTensor & pt, std::size_t channels, const GridConfig & cfg)
{
  if (channels == 0 || channels > pt.num_features) {
    throw InvalidConfig("pooled width must be in [1, " + std::to_string(pt.num_features) + "]");
  }
  PseudoImage img;
  img.channels = channels;
  img.width = static_cast<std::size_t>(detail::cell_count(cfg.pillar.x, cfg.pillar.resolution_x));
  img.height = static_cast<std::size_t>(detail::cell_count(cfg.pillar.y, cfg.pillar.resolution_y));
  img.data.assign(channels * img.height * img.width, 0.0F);
  for (std::size_t p = 0; p < pt.num_pillars; ++p) {
    const auto [ix, iy] = pt.coords[p];
    if (ix < 0 || iy < 0 || static_cast<std::size_t>(ix) >= img.width ||
        static_cast<std::size_t>(iy) >= img.height) {
      throw CoordOutOfRange(
        "pillar " + std::to_string(p) + " at (" + std::to_string(ix) + ", " + std::to_string(iy) +
        ") is outside the " + std::to_string(img.width) + "x" + std::to_string(img.height) + " grid");
    }
    if (pt.counts[p] == 0) {
      continue;
    }
    for (std::size_t c = 0; c < channels; ++c) {
      float m = pt.at(c, p, 0);
      for (std::size_t n = 1; n < pt.counts[p]; ++n) {
        m = std::max(m, pt.at(c, p, n));
      }
      img.data[(c * img.height + static_cast<std::size_t>(iy)) * img.width + static_cast<std::size_t>(ix)] = m;
    }
  }
  return img;
}

// --- Voxels ----------------------------------------------------------------

/// Per-point voxel row: the 8 fused features followed by the offset from the voxel's
/// minimum corner.
inline constexpr std::size_t kVoxelFeatures = kFusedWidth + 3;

struct VoxelGrid
{
  std::size_t num_features = kVoxelFeatures;
  std::size_t max_points = 0;  // slot capacity per voxel
  std::vector<float> data;  // (V, M, F)
  std::vector<std::array<std::int32_t, 3>> coords;  // (ix, iy, iz)
  std::vector<std::uint32_t> counts;
  std::vector<KittiClass> classes;  // class of the voxel's first point
  std::vector<std::int64_t> source_index;  // (V, M); -1 marks padding

  std::size_t dropped_out_of_range = 0;
  std::size_t dropped_buffer_full = 0;
  std::size_t dropped_voxel_full = 0;

  std::size_t size() const { return coords.size(); }
  float at(std::size_t v, std::size_t m, std::size_t f) const
  {
    return data[(v * max_points + m) * num_features + f];
  }
  std::size_t retained() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
  std::size_t dropped() const { return dropped_out_of_range + dropped_buffer_full + dropped_voxel_full; }
};

inline std::size_t voxel_point_limit(const VoxelConfig & vc, KittiClass c)
{
  const std::size_t per_class = vc.class_max_points[index_of(c)];
  return per_class > 0 ? per_class : vc.max_points;
}

/// First-come voxel assignment in point order with a bounded voxel buffer. A voxel's
/// point cap depends on the semantic class of the point that opened it.
inline VoxelGrid voxelize(const FusedPointCloud & fpc, const GridConfig & cfg)
{
  cfg.validate();
  const VoxelConfig & vc = cfg.voxel;
  const std::int64_t nx = detail::cell_count(vc.x, vc.size_x);
  const std::int64_t ny = detail::cell_count(vc.y, vc.size_y);
  const std::int64_t nz = detail::cell_count(vc.z, vc.size_z);

  VoxelGrid out;
  out.max_points = std::max(vc.max_points, *std::max_element(vc.class_max_points.begin(), vc.class_max_points.end()));
  const std::size_t M = out.max_points;
  const std::size_t F = kVoxelFeatures;

  std::unordered_map<std::int64_t, std::uint32_t> lookup;
  for (std::size_t i = 0; i < fpc.size(); ++i) {
    const FusedPoint & f = fpc[i];
    const auto ix = detail::cell_index(f[0], vc.x.min, vc.size_x, nx);
    const auto iy = detail::cell_index(f[1], vc.y.min, vc.size_y, ny);
    const auto iz = detail::cell_index(f[2], vc.z.min, vc.size_z, nz);
    if (!ix || !iy || !iz) {
      ++out.dropped_out_of_range;
      continue;
    }
    const std::int64_t key = (*iz * ny + *iy) * nx + *ix;
    auto it = lookup.find(key);
    if (it == lookup.end()) {
      if (out.coords.size() >= vc.max_voxels) {
        ++out.dropped_buffer_full;
        continue;
      }
      it = lookup.emplace(key, static_cast<std::uint32_t>(out.coords.size())).first;
      out.coords.push_back({static_cast<std::int32_t>(*ix), static_cast<std::int32_t>(*iy), static_cast<std::int32_t>(*iz)});
      out.counts.push_back(0);
      out.classes.push_back(fusion::dominant_class(f));
      out.data.resize(out.data.size() + M * F, 0.0F);
      out.source_index.resize(out.source_index.size() + M, -1);
    }
    const std::size_t v = it->second;
    if (out.counts[v] >= voxel_point_limit(vc, out.classes[v])) {
      ++out.dropped_voxel_full;
      continue;
    }
    const std::size_t slot = out.counts[v]++;
    float * row = &out.data[(v * M + slot) * F];
    std::copy(f.begin(), f.end(), row);
    row[kFusedWidth + 0] = static_cast<float>(f[0] - (vc.x.min + static_cast<double>(*ix) * vc.size_x));
    row[kFusedWidth + 1] = static_cast<float>(f[1] - (vc.y.min + static_cast<double>(*iy) * vc.size_y));
    row[kFusedWidth + 2] = static_cast<float>(f[2] - (vc.z.min + static_cast<double>(*iz) * vc.size_z));
    out.source_index[v * M + slot] = static_cast<std::int64_t>(i);
  }
  return out;
}

/// Minimum corner of voxel `coord`.
inline Eigen::Vector3d voxel_min_corner(const VoxelConfig & vc, const std::array<std::int32_t, 3> & coord)
{
  return {vc.x.min + coord[0] * vc.size_x, vc.y.min + coord[1] * vc.size_y, vc.z.min + coord[2] * vc.size_z};
}

// --- Cylindrical partition -------------------------------------------------

struct CylCell
{
  std::int32_t rho = 0;
  std::int32_t phi = 0;
  std::int32_t z = 0;

  friend bool operator==(const CylCell &, const CylCell &) = default;
};

struct CylinderGrid
{
  std::size_t rho_bins = 0;
  std::size_t phi_bins = 0;
  std::size_t z_bins = 0;
  std::vector<std::uint32_t> point_index;  // retained points, input order
  std::vector<CylCell> cells;  // parallel to point_index
  std::vector<std::uint32_t> populations;  // (rho, phi, z) row-major

  std::size_t dropped_rho = 0;
  std::size_t dropped_z = 0;

  std::uint32_t population(const CylCell & c) const
  {
    return populations[(static_cast<std::size_t>(c.rho) * phi_bins + static_cast<std::size_t>(c.phi)) * z_bins +
                       static_cast<std::size_t>(c.z)];
  }
};

inline std::int32_t phi_bin(double phi, std::size_t phi_bins)
{
  const double width = 2.0 * std::numbers::pi / static_cast<double>(phi_bins);
  auto b = static_cast<std::int64_t>(std::floor((phi + std::numbers::pi) / width));
  const auto n = static_cast<std::int64_t>(phi_bins);
  b %= n;
  if (b < 0) {
    b += n;
  }
  return static_cast<std::int32_t>(b);
}

inline CylinderGrid cyl_partition(const FusedPointCloud & fpc, const GridConfig & cfg)
{
  cfg.validate();
  const CylinderConfig & cc = cfg.cylinder;
  const std::int64_t nr = detail::cell_count(cc.rho, cc.rho_resolution);
  const std::int64_t nz = detail::cell_count(cc.z, cc.z_resolution);

  CylinderGrid out;
  out.rho_bins = static_cast<std::size_t>(nr);
  out.phi_bins = cc.phi_bins;
  out.z_bins = static_cast<std::size_t>(nz);
  out.populations.assign(out.rho_bins * out.phi_bins * out.z_bins, 0);

  for (std::size_t i = 0; i < fpc.size(); ++i) {
    const geometry::CylPoint c = geometry::cart_to_cyl({fpc[i][0], fpc[i][1], fpc[i][2]});
    const auto ir = detail::cell_index(c.rho, cc.rho.min, cc.rho_resolution, nr);
    if (!ir) {
      ++out.dropped_rho;
      continue;
    }
    const auto iz = detail::cell_index(c.z, cc.z.min, cc.z_resolution, nz);
    if (!iz) {
      ++out.dropped_z;
      continue;
    }
    const CylCell cell{static_cast<std::int32_t>(*ir), phi_bin(c.phi, cc.phi_bins), static_cast<std::int32_t>(*iz)};
    out.point_index.push_back(static_cast<std::uint32_t>(i));
    out.cells.push_back(cell);
    ++out.populations[(static_cast<std::size_t>(cell.rho) * out.phi_bins + static_cast<std::size_t>(cell.phi)) * out.z_bins +
                      static_cast<std::size_t>(cell.z)];
  }
  return out;
}

// --- Box regression targets ------------------------------------------------

struct BinTarget
{
  std::int32_t bin_x = 0;
  std::int32_t bin_z = 0;
  double residual_x = 0.0;  // in units of the bin size
  double residual_z = 0.0;
};

namespace detail
{

inline std::pair<std::int32_t, double> encode_axis(double offset, const BinConfig & bc, const char * axis)
{
  const double s = bc.search_range;
  if (!(std::abs(offset) <= s)) {
    throw Overflow(std::string("offset along ") + axis + " exceeds the search range");
  }
  const auto nbins = static_cast<std::int64_t>(std::llround(2.0 * s / bc.bin_size));
  const double shifted = offset + s;
  auto bin = static_cast<std::int64_t>(std::floor(shifted / bc.bin_size));
  bin = std::clamp<std::int64_t>(bin, 0, nbins - 1);
  const double residual = (shifted - (static_cast<double>(bin) + 0.5) * bc.bin_size) / bc.bin_size;
  return {static_cast<std::int32_t>(bin), residual};
}

inline double decode_axis(std::int32_t bin, double residual, const BinConfig & bc)
{
  return -bc.search_range + (bin + 0.5) * bc.bin_size + residual * bc.bin_size;
}

}  // namespace detail

/// Bin index and normalized in-bin residual of the target center relative to a
/// foreground point, on the x and z axes.
inline BinTarget bin_encode_center(const Eigen::Vector2d & point_xz, const Eigen::Vector2d & target_xz, const BinConfig & bc)
{
  const auto [bx, rx] = detail::encode_axis(target_xz.x() - point_xz.x(), bc, "x");
  const auto [bz, rz] = detail::encode_axis(target_xz.y() - point_xz.y(), bc, "z");
  return {bx, bz, rx, rz};
}

inline Eigen::Vector2d bin_decode_center(const Eigen::Vector2d & point_xz, const BinTarget & t, const BinConfig & bc)
{
  return {point_xz.x() + detail::decode_axis(t.bin_x, t.residual_x, bc),
          point_xz.y() + detail::decode_axis(t.bin_z, t.residual_z, bc)};
}

using AnchorResidual = std::array<double, 7>;

/// (dx, dy)/diag, dz/h_a, log size ratios, sin of the yaw difference.
inline AnchorResidual anchor_residual_encode(const Box3D & gt, const Box3D & anchor)
{
  const double diag = std::sqrt(anchor.w * anchor.w + anchor.l * anchor.l);
  if (!(diag > 0.0) || !(anchor.w > 0.0) || !(anchor.h > 0.0) || !(anchor.l > 0.0)) {
    throw DegenerateAnchor("anchor must have positive size");
  }
  return {(gt.x - anchor.x) / diag,
          (gt.y - anchor.y) / diag,
          (gt.z - anchor.z) / anchor.h,
          std::log(gt.w / anchor.w),
          std::log(gt.h / anchor.h),
          std::log(gt.l / anchor.l),
          std::sin(gt.yaw - anchor.yaw)};
}

/// Inverse of anchor_residual_encode. The yaw is recovered in (a - pi/2, a + pi/2);
/// the direction classifier resolves the remaining flip.
inline Box3D anchor_residual_decode(const AnchorResidual & r, const Box3D & anchor)
{
  const double diag = std::sqrt(anchor.w * anchor.w + anchor.l * anchor.l);
  if (!(diag > 0.0) || !(anchor.h > 0.0)) {
    throw DegenerateAnchor("anchor must have positive size");
  }
  Box3D b = anchor;
  b.x = anchor.x + r[0] * diag;
  b.y = anchor.y + r[1] * diag;
  b.z = anchor.z + r[2] * anchor.h;
  b.w = anchor.w * std::exp(r[3]);
  b.h = anchor.h * std::exp(r[4]);
  b.l = anchor.l * std::exp(r[5]);
  b.yaw = geometry::normalize_angle(anchor.yaw + std::asin(std::clamp(r[6], -1.0, 1.0)));
  b.score.reset();
  return b;
}

}  // namespace semfuse::encoders

#endif  // SEMFUSE__ENCODERS_HPP_
