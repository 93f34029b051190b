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

// Module property suites shared by `semfuse selftest` and the acceptance binary.
// Each check returns a named pass/fail record; nothing here throws on a failed
// property, so one broken suite cannot hide the others.

#ifndef SEMFUSE__SELFTEST_HPP_
#define SEMFUSE__SELFTEST_HPP_

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "semfuse/augmentation.hpp"
#include "semfuse/encoders.hpp"
#include "semfuse/evaluation.hpp"
#include "semfuse/geometry.hpp"
#include "semfuse/kitti_io.hpp"
#include "semfuse/losses.hpp"
#include "semfuse/rng.hpp"
#include "semfuse/semantic_fusion.hpp"
#include "semfuse/testing/oracles.hpp"
#include "semfuse/testing/synthetic.hpp"

namespace semfuse::selftest
{

struct CheckResult
{
  std::string name;
  bool passed = true;
  std::string detail;
  double seconds = 0.0;
};

using IouFn = std::function<double(const Box3D &, const Box3D &)>;

/// The IoU implementations under test; replaceable so a fixture can inject a bug.
struct Hooks
{
  IouFn bev_iou = [](const Box3D & a, const Box3D & b) { return geometry::bev_iou(a, b); };
  IouFn iou_3d = [](const Box3D & a, const Box3D & b) { return geometry::iou_3d(a, b); };
};

struct Sizes
{
  std::size_t fusion_frames = 1000;
  std::size_t fusion_points = 2000;
  std::size_t iou_pairs = 1000;
  std::size_t mc_samples = 1000000;
  std::size_t ap_scenarios = 200;
  std::size_t gradient_inputs = 1000;
  std::size_t encoder_frames = 100;
  std::size_t roundtrip_cases = 1000;
  std::size_t augment_scenes = 100;
};

namespace detail
{

inline std::string fmt(const char * f, double v)
{
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Records the first failure; later ones only bump the count.
struct Failures
{
  std::size_t count = 0;
  std::string first;

  void add(const std::string & what)
  {
    if (count++ == 0) first = what;
  }
  void finish(CheckResult & r, const std::string & ok_detail) const
  {
    r.passed = count == 0;
    r.detail = count == 0 ? ok_detail : std::to_string(count) + " failure(s); first: " + first;
  }
};

template <class Fn>
CheckResult timed(const std::string & name, Fn && fn)
{
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r;
  r.name = name;
  try {
    fn(r);
  } catch (const std::exception & e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

template <class A, class B>
bool same_bytes(const A & a, const B & b)
{
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(a[0])) == 0);
}

}  // namespace detail

// --- Fusion ----------------------------------------------------------------

/// Valid one-hot / unit-sum semantic blocks, and strip(concat(pc)) == pc byte for byte.
inline CheckResult check_fusion(const Sizes & sz, std::uint64_t seed = 1)
{
  return detail::timed("fusion: semantic block + geometry passthrough", [&](CheckResult & r) {
    detail::Failures fail;
    const auto map = fusion::ClassMap::defaults();
    for (std::size_t f = 0; f < sz.fusion_frames; ++f) {
      Rng rng = Rng::for_frame(seed, std::to_string(f));
      const auto pc = testing::random_cloud(sz.fusion_points, rng);
      const auto labels = testing::random_labels(pc.size(), rng);
      const auto logits = testing::random_logits(pc.size(), rng);
      const auto by_label = fusion::concat_sem_feature(labels, pc, map);
      const auto by_score = fusion::concat_score_feature(logits, pc);
      for (std::size_t i = 0; i < pc.size(); ++i) {
        int ones = 0, zeros = 0;
        double sum = 0.0;
        bool in_unit = true;
        for (std::size_t k = 0; k < kNumKittiClasses; ++k) {
          const float v = by_label[i][kGeometryWidth + k];
          ones += v == 1.0F;
          zeros += v == 0.0F;
          const float s = by_score[i][kGeometryWidth + k];
          sum += s;
          in_unit = in_unit && s >= 0.0F && s <= 1.0F;
        }
        const auto expect = index_of(map(labels[i].semantic_id));
        if (ones != 1 || zeros != 3 || by_label[i][kGeometryWidth + expect] != 1.0F) {
          fail.add("frame " + std::to_string(f) + " point " + std::to_string(i) + ": bad one-hot");
        }
        if (!(std::abs(sum - 1.0) <= 1e-5) || !in_unit) {
          fail.add("frame " + std::to_string(f) + " point " + std::to_string(i) + ": score block sum " +
                   detail::fmt("%.9g", sum));
        }
      }
      if (!detail::same_bytes(fusion::strip_semantics(by_label), pc) ||
          !detail::same_bytes(fusion::strip_semantics(by_score), pc)) {
        fail.add("frame " + std::to_string(f) + ": geometry changed");
      }
    }
    fail.finish(r, std::to_string(sz.fusion_frames) + " frames x " + std::to_string(sz.fusion_points) + " points");
  });
}

// --- Rotated IoU -----------------------------------------------------------

/// Random pair with a good chance of overlap: `b` is a perturbed copy of `a` or an
/// independent box nearby.
inline std::pair<Box3D, Box3D> random_iou_pair(Rng & rng)
{
  const Box3D a = testing::random_box(rng, 2.0);
  Box3D b;
  if (rng.bernoulli(0.5)) {
    b = a;
    b.x += rng.uniform(-1.0, 1.0);
    b.y += rng.uniform(-1.0, 1.0);
    b.z += rng.uniform(-0.5, 0.5);
    b.w *= rng.uniform(0.7, 1.3);
    b.l *= rng.uniform(0.7, 1.3);
    b.h *= rng.uniform(0.7, 1.3);
    b.yaw += rng.uniform(-1.0, 1.0);
  } else {
    b = testing::random_box(rng, 2.0);
  }
  return {a, b};
}

inline CheckResult check_iou_oracle(const Sizes & sz, const Hooks & hooks = {}, std::uint64_t seed = 2)
{
  return detail::timed("geometry: rotated IoU vs Monte-Carlo", [&](CheckResult & r) {
    detail::Failures fail;
    Rng rng(seed);
    double worst = 0.0;
    std::size_t overlapping = 0;
    for (std::size_t k = 0; k < sz.iou_pairs; ++k) {
      const auto [a, b] = random_iou_pair(rng);
      const auto bev = testing::monte_carlo_iou(a, b, sz.mc_samples, rng, false);
      const auto vol = testing::monte_carlo_iou(a, b, sz.mc_samples, rng, true);
      const double e_bev = std::abs(hooks.bev_iou(a, b) - bev.iou);
      const double e_3d = std::abs(hooks.iou_3d(a, b) - vol.iou);
      worst = std::max({worst, e_bev, e_3d});
      overlapping += vol.iou > 0.0;
      if (!(e_bev <= 1e-2) || !(e_3d <= 1e-2)) {
        fail.add("pair " + std::to_string(k) + ": |err| bev " + detail::fmt("%.4g", e_bev) + " 3d " +
                 detail::fmt("%.4g", e_3d));
      }
    }
    Box3D sq;
    sq.w = sq.l = sq.h = 1.0;
    Box3D rot = sq;
    rot.yaw = std::numbers::pi / 4.0;
    const double k = std::numbers::sqrt2 - 1.0;
    const double expected = 2.0 * k / (2.0 - 2.0 * k);
    const double got = hooks.bev_iou(sq, rot);
    if (!(std::abs(got - expected) <= 1e-2)) {
      fail.add("45-degree squares: " + detail::fmt("%.6f", got) + " vs " + detail::fmt("%.6f", expected));
    }
    fail.finish(r, std::to_string(sz.iou_pairs) + " pairs (" + std::to_string(overlapping) +
                     " overlapping), max |err| " + detail::fmt("%.2e", worst) + ", 45-degree squares " +
                     detail::fmt("%.4f", got));
  });
}

// --- AP --------------------------------------------------------------------

inline CheckResult check_ap_oracle(const Sizes & sz, std::uint64_t seed = 3)
{
  return detail::timed("evaluation: AP vs brute-force evaluator", [&](CheckResult & r) {
    detail::Failures fail;
    Rng rng(seed);
    std::size_t partial = 0;  // cells strictly between 0 and 100
    for (std::size_t s = 0; s < sz.ap_scenarios; ++s) {
      const auto sc = testing::random_eval_scenario(rng);
      for (const auto mode : {evaluation::Interpolation::R40, evaluation::Interpolation::R11}) {
        evaluation::EvalConfig cfg;
        cfg.interpolation = mode;
        const auto got = evaluation::evaluate_benchmark(sc.dets, sc.gts, cfg).ap_table();
        const auto want = testing::brute_force_evaluate(sc.dets, sc.gts, mode);
        for (const auto & c : got)
          for (const auto & d : c)
            for (const double v : d) partial += v > 0.0 && v < 100.0;
        if (got != want) {
          fail.add("scenario " + std::to_string(s) + (mode == evaluation::Interpolation::R40 ? " R40" : " R11"));
        }
      }
    }
    const auto gts = testing::covering_ground_truth(rng);
    const auto perfect = evaluation::evaluate_benchmark(testing::perfect_detections(gts), gts).ap_table();
    std::vector<evaluation::EvalFrame> empty;
    for (const auto & g : gts) empty.push_back({g.id, {}});
    const auto none = evaluation::evaluate_benchmark(empty, gts).ap_table();
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t m = 0; m < 2; ++m) {
          if (perfect[c][d][m] != 100.0) fail.add("perfect detections: cell not 100");
          if (none[c][d][m] != 0.0) fail.add("empty detections: cell not 0");
        }
    fail.finish(r, std::to_string(sz.ap_scenarios) + " scenarios (R40 and R11) exact, " + std::to_string(partial) +
                     " partial cells; perfect=100, empty=0");
  });
}

// --- Losses ----------------------------------------------------------------

namespace detail
{

inline std::vector<double> random_probs(Rng & rng, std::size_t n, double lo = 0.05, double hi = 0.95)
{
  std::vector<double> p(n);
  for (auto & v : p) v = rng.uniform(lo, hi);
  return p;
}

/// Lovasz is piecewise linear in the errors; keep every pair of per-class errors
/// farther apart than the finite-difference step so no sort order flips.
inline bool lovasz_smooth(const std::vector<double> & probs, std::size_t k, const std::vector<std::size_t> & labels)
{
  const std::size_t n = labels.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = labels[i] == c ? 1.0 - probs[i * k + c] : probs[i * k + c];
    std::sort(e.begin(), e.end());
    for (std::size_t i = 1; i < n; ++i) {
      if (e[i] - e[i - 1] < 1e-3) return false;
    }
  }
  return true;
}

}  // namespace detail

inline CheckResult check_gradients(const Sizes & sz, std::uint64_t seed = 4)
{
  return detail::timed("losses: analytic vs central-difference gradients", [&](CheckResult & r) {
    using detail::fmt;
    using testing::central_difference;
    using testing::max_relative_error;
    detail::Failures fail;
    Rng rng(seed);
    double worst = 0.0;
    auto check = [&](const char * name, std::size_t i, const std::vector<double> & analytic,
                     const std::function<double(const std::vector<double> &)> & f, const std::vector<double> & x) {
      const double e = max_relative_error(analytic, central_difference(f, x, 1e-5));
      worst = std::max(worst, e);
      if (!(e < 1e-4)) fail.add(std::string(name) + " input " + std::to_string(i) + ": rel err " + fmt("%.3g", e));
    };
    const std::size_t n = sz.gradient_inputs;
    for (std::size_t i = 0; i < n; ++i) {
      // focal
      const double alpha = rng.uniform(0.1, 0.9);
      const double gamma = rng.uniform(0.0, 3.0);
      const std::vector<double> p{rng.uniform(0.02, 0.98)};
      check("focal", i, losses::focal_loss(p[0], alpha, gamma).grad,
            [&](const std::vector<double> & x) { return losses::focal_loss(x[0], alpha, gamma).value; }, p);

      // smooth L1, away from the |r| = beta kink
      const double beta = rng.uniform(0.5, 2.0);
      std::vector<double> res{rng.uniform(-3.0, 3.0)};
      while (std::abs(std::abs(res[0]) - beta) < 1e-3) res[0] = rng.uniform(-3.0, 3.0);
      check("smooth_l1", i, losses::smooth_l1(res[0], beta).grad,
            [&](const std::vector<double> & x) { return losses::smooth_l1(x[0], beta).value; }, res);

      // weighted cross-entropy, single point and batch mean
      const std::size_t k = 4;
      const auto probs = detail::random_probs(rng, k);
      const auto weights = detail::random_probs(rng, k, 0.2, 3.0);
      const std::size_t target = rng.below(k);
      check("wce", i, losses::weighted_cross_entropy(probs, target, weights).grad,
            [&](const std::vector<double> & x) { return losses::weighted_cross_entropy(x, target, weights).value; },
            probs);

      const std::size_t npts = 2 + rng.below(7);
      std::vector<std::size_t> labels(npts);
      for (auto & y : labels) y = rng.below(k);
      auto batch = detail::random_probs(rng, npts * k);
      check("wce_mean", i, losses::weighted_cross_entropy_mean(batch, k, labels, weights).grad,
            [&](const std::vector<double> & x) {
              return losses::weighted_cross_entropy_mean(x, k, labels, weights).value;
            },
            batch);

      while (!detail::lovasz_smooth(batch, k, labels)) batch = detail::random_probs(rng, npts * k);
      check("lovasz", i, losses::lovasz_softmax(batch, k, labels).grad,
            [&](const std::vector<double> & x) { return losses::lovasz_softmax(x, k, labels).value; }, batch);
      check("seg_total", i, losses::total_seg_loss(batch, k, labels, weights).grad,
            [&](const std::vector<double> & x) { return losses::total_seg_loss(x, k, labels, weights).value; },
            batch);

      // direction classifier
      const std::vector<double> logits{rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)};
      const bool bit = rng.bernoulli(0.5);
      check("direction", i, losses::direction_loss({logits[0], logits[1]}, bit).grad,
            [&](const std::vector<double> & x) { return losses::direction_loss({x[0], x[1]}, bit).value; }, logits);

      // focal with gamma = 0 and alpha = 1 is plain cross-entropy
      const double q = rng.uniform(1e-6, 1.0);
      const double diff = std::abs(losses::focal_loss(q, 1.0, 0.0).value + std::log(q));
      if (!(diff <= 1e-12)) fail.add("focal(gamma=0, alpha=1) != CE at p=" + fmt("%.17g", q));
    }
    fail.finish(r, std::to_string(n) + " inputs x 7 losses, max rel err " + fmt("%.2e", worst));
  });
}

// --- Encoders --------------------------------------------------------------

inline void check_pillars(const FusedPointCloud & pts, const encoders::PillarTensor & t, detail::Failures & fail,
                          const std::string & tag)
{
  if (t.retained() + t.dropped() != pts.size()) fail.add(tag + ": pillar point accounting");
  std::vector<bool> seen(pts.size(), false);
  for (std::size_t p = 0; p < t.num_pillars; ++p) {
    for (std::size_t n = 0; n < t.max_points; ++n) {
      const auto src = t.source_index[p * t.max_points + n];
      if (n >= t.counts[p]) {
        bool zero = src == -1;
        for (std::size_t d = 0; d < t.num_features; ++d) zero = zero && t.at(d, p, n) == 0.0F;
        if (!zero) fail.add(tag + ": pillar padding not zero");
        continue;
      }
      if (src < 0 || static_cast<std::size_t>(src) >= pts.size() || seen[static_cast<std::size_t>(src)]) {
        fail.add(tag + ": bad pillar source index");
        continue;
      }
      seen[static_cast<std::size_t>(src)] = true;
      const auto & f = pts[static_cast<std::size_t>(src)];
      for (std::size_t d = 0; d < kGeometryWidth; ++d) {
        if (std::bit_cast<std::uint32_t>(t.at(d, p, n)) != std::bit_cast<std::uint32_t>(f[d])) {
          fail.add(tag + ": pillar geometry feature altered");
        }
      }
      for (std::size_t s = 0; s < kNumKittiClasses; ++s) {
        if (std::bit_cast<std::uint32_t>(t.at(9 + s, p, n)) != std::bit_cast<std::uint32_t>(f[kGeometryWidth + s])) {
          fail.add(tag + ": pillar semantic feature altered");
        }
      }
    }
  }
}

inline void check_voxels(const FusedPointCloud & pts, const encoders::VoxelGrid & v, detail::Failures & fail,
                         const std::string & tag)
{
  if (v.retained() + v.dropped() != pts.size()) fail.add(tag + ": voxel point accounting");
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t m = 0; m < v.max_points; ++m) {
      const auto src = v.source_index[i * v.max_points + m];
      if (m >= v.counts[i]) {
        bool zero = src == -1;
        for (std::size_t f = 0; f < v.num_features; ++f) zero = zero && v.at(i, m, f) == 0.0F;
        if (!zero) fail.add(tag + ": voxel padding not zero");
        continue;
      }
      if (src < 0 || static_cast<std::size_t>(src) >= pts.size()) {
        fail.add(tag + ": bad voxel source index");
        continue;
      }
      const auto & p = pts[static_cast<std::size_t>(src)];
      for (std::size_t f = 0; f < kFusedWidth; ++f) {
        if (std::bit_cast<std::uint32_t>(v.at(i, m, f)) != std::bit_cast<std::uint32_t>(p[f])) {
          fail.add(tag + ": voxel feature altered");
        }
      }
    }
  }
}

inline CheckResult check_encoders(const Sizes & sz, std::uint64_t seed = 5)
{
  return detail::timed("encoders: feature preservation, padding, accounting, determinism", [&](CheckResult & r) {
    detail::Failures fail;
    encoders::GridConfig tight;  // small caps so subsampling and capacity drops happen
    tight.pillar.max_points = 8;
    tight.pillar.max_pillars = 400;
    tight.voxel.max_voxels = 500;
    tight.voxel.max_points = 3;
    tight.voxel.class_max_points = {0, 5, 2, 0};
    for (std::size_t f = 0; f < sz.encoder_frames; ++f) {
      const std::string id = std::to_string(f);
      Rng rng = Rng::for_frame(seed, id);
      const auto pts = testing::clustered_fused(500 + rng.below(4000), rng);
      for (const bool use_tight : {true, false}) {
        const encoders::GridConfig g = use_tight ? tight : encoders::GridConfig{};
        const std::string tag = "frame " + id + (use_tight ? " (tight)" : " (default)");
        Rng r1 = Rng::for_frame(seed + 1, id);
        Rng r2 = Rng::for_frame(seed + 1, id);
        const auto a = encoders::pillarize(pts, g, r1);
        const auto b = encoders::pillarize(pts, g, r2);
        check_pillars(pts, a, fail, tag);
        if (!detail::same_bytes(a.data, b.data) || a.coords != b.coords || a.source_index != b.source_index) {
          fail.add(tag + ": pillarize not deterministic");
        }
        const auto va = encoders::voxelize(pts, g);
        const auto vb = encoders::voxelize(pts, g);
        check_voxels(pts, va, fail, tag);
        if (!detail::same_bytes(va.data, vb.data) || va.coords != vb.coords) {
          fail.add(tag + ": voxelize not deterministic");
        }
      }
    }
    fail.finish(r, std::to_string(sz.encoder_frames) + " frames x 2 grid configs");
  });
}

// --- Round-trips -----------------------------------------------------------

inline CheckResult check_roundtrips(const Sizes & sz, std::uint64_t seed = 6)
{
  return detail::timed("io/encoders: format and encoding round-trips", [&](CheckResult & r) {
    detail::Failures fail;
    Rng rng(seed);
    using detail::fmt;
    // Binary formats, bit-exact.
    for (std::size_t f = 0; f < 20; ++f) {
      const auto pc = testing::random_cloud(1 + rng.below(5000), rng);
      const auto bytes = io::write_velodyne(pc);
      if (!detail::same_bytes(io::write_velodyne(io::parse_velodyne(bytes)), bytes)) fail.add("velodyne");
      const auto labels = testing::random_labels(pc.size(), rng);
      const auto lbytes = io::write_semantic_labels(labels);
      if (!detail::same_bytes(io::write_semantic_labels(io::parse_semantic_labels(lbytes)), lbytes)) fail.add("label");
      const auto fused = testing::random_fused(pc.size(), rng);
      const auto fbytes = io::write_fused(fused);
      if (!detail::same_bytes(io::parse_fused(fbytes), fused)) fail.add("fused");
    }
    // Detection text: coordinates within 1e-4 after a camera-frame round trip.
    double worst_det = 0.0;
    for (std::size_t f = 0; f < 20; ++f) {
      const auto calib = testing::kitti_like_calibration(rng);
      std::vector<Box3D> dets;
      for (std::size_t k = 0; k < 50; ++k) {
        Box3D b = testing::random_box(rng, 1.0);
        b.x += rng.uniform(5.0, 60.0);
        b.y += rng.uniform(-20.0, 20.0);
        b.z += -1.0;
        b.cls = static_cast<KittiClass>(1 + rng.below(3));
        b.score = rng.uniform();
        dets.push_back(b);
      }
      const auto objs = io::parse_object_labels(io::write_detections(dets, calib));
      if (objs.size() != dets.size()) {
        fail.add("detection text: wrong line count");
        continue;
      }
      for (std::size_t k = 0; k < dets.size(); ++k) {
        const auto back = io::box_from_camera_object(objs[k], calib);
        const auto & d = dets[k];
        const double e = std::max({std::abs(back.x - d.x), std::abs(back.y - d.y), std::abs(back.z - d.z),
                                   std::abs(back.w - d.w), std::abs(back.h - d.h), std::abs(back.l - d.l),
                                   std::abs(geometry::normalize_angle(back.yaw - d.yaw)),
                                   std::abs(*back.score - *d.score)});
        worst_det = std::max(worst_det, e);
        if (!(e <= 1e-4) || back.cls != d.cls) fail.add("detection text: box " + std::to_string(k) + " err " + fmt("%.3g", e));
      }
    }
    // cart <-> cyl
    double worst_cyl = 0.0;
    for (std::size_t k = 0; k < sz.roundtrip_cases; ++k) {
      Eigen::Vector3d p(rng.uniform(-80.0, 80.0), rng.uniform(-80.0, 80.0), rng.uniform(-5.0, 5.0));
      if (std::hypot(p.x(), p.y()) < 1e-3) continue;
      const double e = (geometry::cyl_to_cart(geometry::cart_to_cyl(p)) - p).norm() / p.norm();
      worst_cyl = std::max(worst_cyl, e);
      if (!(e < 1e-6)) fail.add("cart<->cyl rel err " + fmt("%.3g", e));
    }
    // Anchor residuals (heading within the sin-invertible half-plane) and bins.
    double worst_anchor = 0.0;
    double worst_bin = 0.0;
    encoders::BinConfig bins;
    for (std::size_t k = 0; k < sz.roundtrip_cases; ++k) {
      Box3D anchor = testing::random_box(rng, 30.0);
      Box3D gt = testing::random_box(rng, 30.0);
      gt.yaw = geometry::normalize_angle(anchor.yaw + rng.uniform(-1.4, 1.4));
      const auto back = encoders::anchor_residual_decode(encoders::anchor_residual_encode(gt, anchor), anchor);
      const double e = std::max({std::abs(back.x - gt.x), std::abs(back.y - gt.y), std::abs(back.z - gt.z),
                                 std::abs(back.w - gt.w), std::abs(back.h - gt.h), std::abs(back.l - gt.l),
                                 std::abs(geometry::normalize_angle(back.yaw - gt.yaw))});
      worst_anchor = std::max(worst_anchor, e);
      if (!(e <= 1e-6)) fail.add("anchor residual err " + fmt("%.3g", e));

      const Eigen::Vector2d pt(rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0));
      const Eigen::Vector2d target = pt + Eigen::Vector2d(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
      const auto dec = encoders::bin_decode_center(pt, encoders::bin_encode_center(pt, target, bins), bins);
      const double eb = (dec - target).cwiseAbs().maxCoeff();
      worst_bin = std::max(worst_bin, eb);
      if (!(eb <= 1e-9)) fail.add("bin encoding err " + fmt("%.3g", eb));
    }
    fail.finish(r, "detection " + fmt("%.1e", worst_det) + ", cyl " + fmt("%.1e", worst_cyl) + ", anchor " +
                     fmt("%.1e", worst_anchor) + ", bin " + fmt("%.1e", worst_bin));
  });
}

// --- Augmentation ----------------------------------------------------------

inline CheckResult check_augmentation(const Sizes & sz, std::uint64_t seed = 7)
{
  return detail::timed("augmentation: rigid-motion, flip, semantics, collision contracts", [&](CheckResult & r) {
    detail::Failures fail;
    using detail::fmt;
    // A shared database drawn from a few donor scenes.
    std::vector<augmentation::GtFrame> donors;
    for (std::size_t k = 0; k < 8; ++k) {
      Rng drng = Rng::for_frame(seed, "donor" + std::to_string(k));
      donors.push_back({"donor" + std::to_string(k), testing::random_scene(drng, 10, 0)});
    }
    const auto db = augmentation::build_gt_database(donors);
    augmentation::AugmentConfig cfg;
    double worst_rot = 0.0, worst_vol = 0.0;
    std::size_t placed = 0, rejected = 0, reverted = 0;
    for (std::size_t s = 0; s < sz.augment_scenes; ++s) {
      const std::string id = std::to_string(s);
      Rng rng = Rng::for_frame(seed, id);
      const auto scene = testing::random_scene(rng);

      // Rotation preserves distance to the origin; points are float, so the bound is
      // relative to the radius.
      const double angle = rng.uniform(cfg.rotation_min, cfg.rotation_max);
      const auto rot = augmentation::rotate_z(scene, angle);
      for (std::size_t i = 0; i < scene.points.size(); ++i) {
        const auto & a = scene.points[i];
        const auto & b = rot.points[i];
        const double r0 = std::hypot(double{a[0]}, double{a[1]}, double{a[2]});
        const double r1 = std::hypot(double{b[0]}, double{b[1]}, double{b[2]});
        const double e = std::abs(r1 - r0) / std::max(r0, 1.0);
        worst_rot = std::max(worst_rot, e);
        if (!(e <= 1e-6)) fail.add("scene " + id + ": rotation changed a point radius by " + fmt("%.3g", e));
      }
      for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
        const auto & a = scene.boxes[i];
        const auto & b = rot.boxes[i];
        const double e = std::abs(std::hypot(b.x, b.y, b.z) - std::hypot(a.x, a.y, a.z));
        worst_rot = std::max(worst_rot, e);
        if (!(e <= 1e-6)) fail.add("scene " + id + ": rotation changed a box center radius");
      }

      // Scaling multiplies every box volume by s^3.
      const double s3 = rng.uniform(cfg.scale_min, cfg.scale_max);
      const auto scaled = augmentation::scale(scene, s3);
      for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
        const double e = std::abs(scaled.boxes[i].volume() - s3 * s3 * s3 * scene.boxes[i].volume());
        worst_vol = std::max(worst_vol, e);
        if (!(e <= 1e-9)) fail.add("scene " + id + ": volume not scaled by s^3");
      }

      // Flip is an involution, bit-exact.
      const auto twice = augmentation::flip_x(augmentation::flip_x(scene));
      if (!detail::same_bytes(twice.points, scene.points)) fail.add("scene " + id + ": flip twice moved points");
      for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
        const auto & a = scene.boxes[i];
        const auto & b = twice.boxes[i];
        if (a.x != b.x || a.y != b.y || a.z != b.z || geometry::normalize_angle(a.yaw) != b.yaw) {
          fail.add("scene " + id + ": flip twice moved a box");
        }
      }

      // Full pipeline: semantic columns of the original points untouched, sampled
      // points carried verbatim, and every box pairwise BEV-disjoint.
      augmentation::AugmentStats st;
      Rng arng = Rng::for_frame(seed + 1, id);
      const auto out = augmentation::augment(scene, db, cfg, arng, &st);
      placed += st.placed;
      rejected += st.rejected;
      reverted += st.reverted;
      if (out.points.size() != scene.points.size() + st.placed_points) {
        fail.add("scene " + id + ": point count bookkeeping");
      }
      for (std::size_t i = 0; i < scene.points.size() && i < out.points.size(); ++i) {
        for (std::size_t k = kGeometryWidth; k < kFusedWidth; ++k) {
          if (std::bit_cast<std::uint32_t>(out.points[i][k]) != std::bit_cast<std::uint32_t>(scene.points[i][k])) {
            fail.add("scene " + id + ": semantic column changed");
          }
        }
      }
      for (std::size_t i = 0; i < out.boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < out.boxes.size(); ++j) {
          if (geometry::bev_iou(out.boxes[i], out.boxes[j]) != 0.0) {
            fail.add("scene " + id + ": boxes " + std::to_string(i) + "," + std::to_string(j) + " overlap");
          }
        }
      }
    }
    fail.finish(r, std::to_string(sz.augment_scenes) + " scenes, rotation rel err " + fmt("%.1e", worst_rot) +
                     ", volume err " + fmt("%.1e", worst_vol) + ", sampled " + std::to_string(placed) +
                     " placed / " + std::to_string(rejected) + " rejected, " + std::to_string(reverted) +
                     " per-box reverts");
  });
}

// --- Driver ----------------------------------------------------------------

/// Sizes used by `semfuse selftest`: the full acceptance sizes except for a lighter
/// Monte-Carlo budget.
inline Sizes default_selftest_sizes()
{
  Sizes s;
  s.fusion_frames = 200;
  s.iou_pairs = 300;
  s.mc_samples = 200000;
  return s;
}

inline std::vector<CheckResult> run_all(const Sizes & sz, const Hooks & hooks = {})
{
  return {check_roundtrips(sz), check_fusion(sz), check_iou_oracle(sz, hooks), check_encoders(sz),
          check_augmentation(sz), check_gradients(sz), check_ap_oracle(sz)};
}

inline void print_table(const std::vector<CheckResult> & results, std::ostream & out)
{
  char buf[160];
  for (const auto & r : results) {
    std::snprintf(buf, sizeof buf, "%-4s %-66s %7.2fs  ", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds);
    out << buf << r.detail << "\n";
  }
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto & r) { return !r.passed; });
  out << (failed == 0 ? "all " + std::to_string(results.size()) + " suites passed"
                      : std::to_string(failed) + " of " + std::to_string(results.size()) + " suites FAILED")
      << "\n";
}

/// Runs every suite and prints the table; returns true when all pass.
inline bool run_selftest(std::ostream & out, const Hooks & hooks = {}, const Sizes & sz = default_selftest_sizes())
{
  const auto results = run_all(sz, hooks);
  print_table(results, out);
  return std::all_of(results.begin(), results.end(), [](const auto & r) { return r.passed; });
}

}  // namespace semfuse::selftest

#endif  // SEMFUSE__SELFTEST_HPP_
