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

#ifndef SEMFUSE__EVALUATION_HPP_
#define SEMFUSE__EVALUATION_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semfuse/errors.hpp"
#include "semfuse/geometry.hpp"
#include "semfuse/kitti_io.hpp"
#include "semfuse/types.hpp"

namespace semfuse::evaluation
{

enum class Difficulty : std::uint8_t { Easy = 0, Moderate = 1, Hard = 2, Ignored = 3 };
enum class Metric : std::uint8_t { ThreeD = 0, Bev = 1 };
enum class Interpolation : std::uint8_t { R40, R11 };

inline constexpr std::array<KittiClass, 3> kEvalClasses = {KittiClass::Car, KittiClass::Pedestrian, KittiClass::Cyclist};
inline constexpr std::array<Difficulty, 3> kDifficulties = {Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard};
inline constexpr std::array<Metric, 2> kMetrics = {Metric::ThreeD, Metric::Bev};

constexpr std::string_view difficulty_name(Difficulty d)
{
  switch (d) {
    case Difficulty::Easy:
      return "Easy";
    case Difficulty::Moderate:
      return "Moderate";
    case Difficulty::Hard:
      return "Hard";
    case Difficulty::Ignored:
      break;
  }
  return "Ignored";
}

constexpr std::string_view metric_name(Metric m) { return m == Metric::ThreeD ? "3D" : "BEV"; }

struct DifficultyThresholds
{
  std::array<double, 3> min_height{40.0, 25.0, 25.0};
  std::array<int, 3> max_occlusion{0, 1, 2};
  std::array<double, 3> max_truncation{0.15, 0.30, 0.50};
};

struct EvalConfig
{
  Interpolation interpolation = Interpolation::R40;
  /// IoU threshold per KittiClass slot (3D and BEV alike).
  std::array<double, kNumKittiClasses> iou_threshold{0.0, 0.7, 0.5, 0.5};
  DifficultyThresholds difficulty;
};

/// Strictest bucket whose height, occlusion and truncation limits the object meets.
inline Difficulty assign_difficulty(const io::KittiObject & gt, const DifficultyThresholds & t = {})
{
  for (std::size_t d = 0; d < 3; ++d) {
    if (gt.bbox_height() >= t.min_height[d] && gt.occlusion <= t.max_occlusion[d] &&
        gt.truncation <= t.max_truncation[d]) {
      return static_cast<Difficulty>(d);
    }
  }
  return Difficulty::Ignored;
}

/// Camera-frame label to a z-up box in a calibration-free frame
/// (x = cam z, y = -cam x, z = -cam y). IoU is invariant to this rigid change of frame.
inline Box3D box_from_label(const io::KittiObject & o)
{
  Box3D b;
  b.h = o.dimensions[0];
  b.w = o.dimensions[1];
  b.l = o.dimensions[2];
  b.x = o.location[2];
  b.y = -o.location[0];
  b.z = -o.location[1] + 0.5 * b.h;
  b.yaw = geometry::normalize_angle(-o.rotation_y - 0.5 * std::numbers::pi);
  b.cls = class_from_name(o.type).value_or(KittiClass::Unlabeled);
  b.score = o.score;
  return b;
}

// --- Matching --------------------------------------------------------------

using BBox2D = std::array<double, 4>;

struct PreparedDetection
{
  Box3D box;
  double score = 0.0;
  BBox2D bbox{};
  bool ignored = false;  // below the bucket's minimum height
};

struct PreparedGroundTruth
{
  Box3D box;
  bool ignored = false;  // harder than the bucket, or a neighboring class
};

struct PreparedFrame
{
  std::vector<PreparedDetection> dets;
  std::vector<PreparedGroundTruth> gts;
  std::vector<BBox2D> dont_care;
};

/// Vans count as neighbors of cars and seated persons of pedestrians; they are never
/// false negatives and may absorb detections.
inline bool is_neighbor_class(std::string_view type, KittiClass cls)
{
  return (cls == KittiClass::Car && type == "Van") || (cls == KittiClass::Pedestrian && type == "Person_sitting");
}

inline PreparedFrame prepare_frame(
  std::span<const io::KittiObject> dets, std::span<const io::KittiObject> gts, KittiClass cls, Difficulty bucket,
  const EvalConfig & cfg = {})
{
  const std::string_view name = class_name(cls);
  PreparedFrame f;
  for (const auto & g : gts) {
    if (g.is_dont_care()) {
      f.dont_care.push_back(g.bbox);
    } else if (g.type == name) {
      const Difficulty d = assign_difficulty(g, cfg.difficulty);
      f.gts.push_back({box_from_label(g), d == Difficulty::Ignored || d > bucket});
    } else if (is_neighbor_class(g.type, cls)) {
      f.gts.push_back({box_from_label(g), true});
    }
  }
  const double min_height = cfg.difficulty.min_height[static_cast<std::size_t>(bucket)];
  for (const auto & d : dets) {
    if (d.type != name) {
      continue;
    }
    f.dets.push_back({box_from_label(d), d.score.value_or(0.0), d.bbox, d.bbox_height() < min_height});
  }
  return f;
}

enum class DetOutcome : std::uint8_t { TruePositive, FalsePositive, Ignored };
enum class GtOutcome : std::uint8_t { Matched, Missed, Ignored };

struct Matching
{
  std::vector<DetOutcome> detections;
  std::vector<GtOutcome> ground_truth;
};

/// Intersection area over the detection's own area.
inline double overlap_fraction(const BBox2D & det, const BBox2D & region)
{
  const double area = (det[2] - det[0]) * (det[3] - det[1]);
  if (!(area > 0.0)) {
    return 0.0;
  }
  const double iw = std::min(det[2], region[2]) - std::max(det[0], region[0]);
  const double ih = std::min(det[3], region[3]) - std::max(det[1], region[1]);
  return iw > 0.0 && ih > 0.0 ? iw * ih / area : 0.0;
}

/// Greedy one-to-one matching in descending score order (stable on ties). A detection
/// takes the highest-IoU unmatched valid ground truth at or above `threshold`; failing
/// that it may absorb an ignored ground truth or fall inside a DontCare region, in which
/// case it is neither a true nor a false positive.
template <class IouFn>
Matching match_detections(
  std::span<const PreparedDetection> dets, std::span<const PreparedGroundTruth> gts, std::span<const BBox2D> dont_care,
  IouFn && iou, double threshold)
{
  Matching m;
  m.detections.assign(dets.size(), DetOutcome::Ignored);
  m.ground_truth.resize(gts.size());
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    m.ground_truth[g] = gts[g].ignored ? GtOutcome::Ignored : GtOutcome::Missed;
  }

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  for (const std::size_t d : order) {
    if (dets[d].ignored) {
      continue;
    }
    std::ptrdiff_t best_valid = -1;
    std::ptrdiff_t best_ignored = -1;
    double best_valid_iou = -1.0;
    double best_ignored_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) {
        continue;
      }
      const double o = iou(dets[d].box, gts[g].box);
      if (o < threshold) {
        continue;
      }
      if (!gts[g].ignored && o > best_valid_iou) {
        best_valid = static_cast<std::ptrdiff_t>(g);
        best_valid_iou = o;
      } else if (gts[g].ignored && o > best_ignored_iou) {
        best_ignored = static_cast<std::ptrdiff_t>(g);
        best_ignored_iou = o;
      }
    }
    if (best_valid >= 0) {
      taken[static_cast<std::size_t>(best_valid)] = true;
      m.ground_truth[static_cast<std::size_t>(best_valid)] = GtOutcome::Matched;
      m.detections[d] = DetOutcome::TruePositive;
    } else if (best_ignored >= 0) {
      taken[static_cast<std::size_t>(best_ignored)] = true;
    } else if (std::any_of(dont_care.begin(), dont_care.end(), [&](const BBox2D & r) {
                 return overlap_fraction(dets[d].bbox, r) >= threshold;
               })) {
      // absorbed by a DontCare region
    } else {
      m.detections[d] = DetOutcome::FalsePositive;
    }
  }
  return m;
}

// --- Precision / recall ----------------------------------------------------

struct ScoredOutcome
{
  double score = 0.0;
  bool true_positive = false;
};

struct PrPoint
{
  std::size_t tp = 0;
  std::size_t fp = 0;
  double recall = 0.0;
  double precision = 0.0;
};

struct PrCurve
{
  std::size_t num_gt = 0;
  std::vector<PrPoint> points;
};

/// Pooled detections sorted by score (stable), one point per prefix.
inline PrCurve pr_curve(std::span<const ScoredOutcome> pooled, std::size_t num_gt)
{
  if (num_gt == 0) {
    throw NoGroundTruth();
  }
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a].score > pooled[b].score; });
  PrCurve c;
  c.num_gt = num_gt;
  c.points.reserve(pooled.size());
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto i : order) {
    (pooled[i].true_positive ? tp : fp) += 1;
    c.points.push_back({tp, fp, static_cast<double>(tp) / static_cast<double>(num_gt),
                        static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return c;
}

/// Interpolated AP in percent: mean over recall samples of the best precision at or
/// beyond each sample. Recall comparisons are exact (integer arithmetic).
inline double average_precision(const PrCurve & curve, Interpolation mode = Interpolation::R40)
{
  const std::size_t samples = mode == Interpolation::R40 ? 40 : 11;
  const std::size_t first = mode == Interpolation::R40 ? 1 : 0;
  const std::size_t denom = mode == Interpolation::R40 ? 40 : 10;
  const auto & pts = curve.points;
  std::vector<double> suffix_max(pts.size() + 1, 0.0);
  for (std::size_t k = pts.size(); k-- > 0;) {
    suffix_max[k] = std::max(suffix_max[k + 1], pts[k].precision);
  }
  double sum = 0.0;
  std::size_t k = 0;
  for (std::size_t i = first; i < first + samples; ++i) {
    while (k < pts.size() && pts[k].tp * denom < i * curve.num_gt) {
      ++k;
    }
    sum += suffix_max[k];
  }
  return 100.0 * sum / static_cast<double>(samples);
}

// --- Benchmark -------------------------------------------------------------

struct EvalFrame
{
  std::string id;
  std::vector<io::KittiObject> objects;
};

struct EvalCell
{
  double ap = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_dets = 0;  // true + false positives
  PrCurve curve;
};

/// AP values indexed [class - 1][difficulty][metric].
using ApTable = std::array<std::array<std::array<double, 2>, 3>, 3>;

struct EvalReport
{
  Interpolation interpolation = Interpolation::R40;
  std::array<std::array<std::array<EvalCell, 2>, 3>, 3> cells{};

  EvalCell & cell(KittiClass c, Difficulty d, Metric m)
  {
    return cells[index_of(c) - 1][static_cast<std::size_t>(d)][static_cast<std::size_t>(m)];
  }
  const EvalCell & cell(KittiClass c, Difficulty d, Metric m) const
  {
    return cells[index_of(c) - 1][static_cast<std::size_t>(d)][static_cast<std::size_t>(m)];
  }

  ApTable ap_table() const
  {
    ApTable t{};
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t m = 0; m < 2; ++m) t[c][d][m] = cells[c][d][m].ap;
    return t;
  }
};

/// Full class x difficulty x metric report. Frames are paired by id; every ground-truth
/// frame needs a detection frame and vice versa. Buckets without ground truth report 0.
inline EvalReport evaluate_benchmark(
  std::span<const EvalFrame> det_frames, std::span<const EvalFrame> gt_frames, const EvalConfig & cfg = {})
{
  std::map<std::string, const EvalFrame *> by_id;
  for (const auto & f : det_frames) {
    if (!by_id.emplace(f.id, &f).second) {
      throw FrameMismatch("duplicate detection frame " + f.id);
    }
  }
  if (by_id.size() != gt_frames.size()) {
    throw FrameMismatch(
      std::to_string(det_frames.size()) + " detection frames vs " + std::to_string(gt_frames.size()) +
      " ground-truth frames");
  }
  std::vector<const EvalFrame *> paired;
  for (const auto & g : gt_frames) {
    const auto it = by_id.find(g.id);
    if (it == by_id.end()) {
      throw FrameMismatch("no detections for frame " + g.id);
    }
    paired.push_back(it->second);
  }

  EvalReport report;
  report.interpolation = cfg.interpolation;
  for (const KittiClass cls : kEvalClasses) {
    const double thr = cfg.iou_threshold[index_of(cls)];
    for (const Difficulty diff : kDifficulties) {
      std::vector<PreparedFrame> frames;
      frames.reserve(gt_frames.size());
      for (std::size_t f = 0; f < gt_frames.size(); ++f) {
        frames.push_back(prepare_frame(paired[f]->objects, gt_frames[f].objects, cls, diff, cfg));
      }
      for (const Metric metric : kMetrics) {
        std::vector<ScoredOutcome> pooled;
        std::size_t num_gt = 0;
        for (const auto & pf : frames) {
          const auto iou = [metric](const Box3D & a, const Box3D & b) {
            return metric == Metric::ThreeD ? geometry::iou_3d(a, b) : geometry::bev_iou(a, b);
          };
          const Matching m = match_detections(std::span(pf.dets), std::span(pf.gts), std::span(pf.dont_care), iou, thr);
          for (std::size_t d = 0; d < pf.dets.size(); ++d) {
            if (m.detections[d] != DetOutcome::Ignored) {
              pooled.push_back({pf.dets[d].score, m.detections[d] == DetOutcome::TruePositive});
            }
          }
          num_gt += static_cast<std::size_t>(std::count_if(pf.gts.begin(), pf.gts.end(), [](const auto & g) { return !g.ignored; }));
        }
        EvalCell & cell = report.cell(cls, diff, metric);
        cell.num_gt = num_gt;
        cell.num_dets = pooled.size();
        if (num_gt > 0) {
          cell.curve = pr_curve(pooled, num_gt);
          cell.ap = average_precision(cell.curve, cfg.interpolation);
        }
      }
    }
  }
  return report;
}

// --- Report formatting -----------------------------------------------------

/// Two rows (3D, BEV) by nine columns (class x difficulty), as in the usual result tables.
inline std::string format_ap_table(const ApTable & t, std::string_view title, bool signed_values = false)
{
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-12s | %-23s | %-23s | %-23s\n", std::string(title).c_str(), "Car", "Pedestrian", "Cyclist");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-12s |", "metric");
  out += buf;
  for (int c = 0; c < 3; ++c) {
    out += "  Easy    Mod.    Hard  |";
  }
  out += '\n';
  for (const Metric m : kMetrics) {
    std::snprintf(buf, sizeof(buf), "%-12s |", std::string(metric_name(m)).c_str());
    out += buf;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t d = 0; d < 3; ++d) {
        std::snprintf(buf, sizeof(buf), signed_values ? " %+7.2f" : " %7.2f", t[c][d][static_cast<std::size_t>(m)]);
        out += buf;
      }
      out += " |";
    }
    out += '\n';
  }
  return out;
}

inline std::string report_to_csv(const EvalReport & r)
{
  std::string out = "metric,class,difficulty,ap,num_gt,num_dets\n";
  char buf[160];
  for (const Metric m : kMetrics) {
    for (const KittiClass c : kEvalClasses) {
      for (const Difficulty d : kDifficulties) {
        const auto & cell = r.cell(c, d, m);
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.6f,%zu,%zu\n", std::string(metric_name(m)).c_str(),
                      std::string(class_name(c)).c_str(), std::string(difficulty_name(d)).c_str(), cell.ap, cell.num_gt,
                      cell.num_dets);
        out += buf;
      }
    }
  }
  return out;
}

/// Reads the AP column of a report written by report_to_csv.
inline ApTable parse_report_csv(std::string_view text)
{
  ApTable t{};
  std::array<std::array<std::array<bool, 2>, 3>, 3> seen{};
  io::detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line_no == 1 || line.empty()) {
      return;
    }
    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (f.size() < 4) {
      throw MalformedLine(line_no, "expected metric,class,difficulty,ap");
    }
    std::size_t m = 0;
    if (f[0] == "3D") m = 0;
    else if (f[0] == "BEV") m = 1;
    else throw MalformedLine(line_no, "unknown metric");
    const auto cls = class_from_name(f[1]);
    if (!cls || *cls == KittiClass::Unlabeled) throw MalformedLine(line_no, "unknown class");
    std::size_t d = 0;
    if (f[2] == "Easy") d = 0;
    else if (f[2] == "Moderate") d = 1;
    else if (f[2] == "Hard") d = 2;
    else throw MalformedLine(line_no, "unknown difficulty");
    const auto ap = io::detail::to_double(f[3]);
    if (!ap) throw MalformedLine(line_no, "bad AP value");
    t[index_of(*cls) - 1][d][m] = *ap;
    seen[index_of(*cls) - 1][d][m] = true;
  });
  for (const auto & c : seen)
    for (const auto & d : c)
      for (const bool s : d)
        if (!s) throw MalformedLine(0, "report is missing cells");
  return t;
}

inline ApTable ap_delta(const ApTable & current, const ApTable & baseline)
{
  ApTable t{};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t d = 0; d < 3; ++d)
      for (std::size_t m = 0; m < 2; ++m) t[c][d][m] = current[c][d][m] - baseline[c][d][m];
  return t;
}

}  // namespace semfuse::evaluation

#endif  // SEMFUSE__EVALUATION_HPP_
