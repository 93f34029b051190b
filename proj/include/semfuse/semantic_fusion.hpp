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

#ifndef SEMFUSE__SEMANTIC_FUSION_HPP_
#define SEMFUSE__SEMANTIC_FUSION_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "semfuse/errors.hpp"
#include "semfuse/kitti_io.hpp"
#include "semfuse/types.hpp"

namespace semfuse::fusion
{

/// Total map from SemanticKITTI raw semantic ids to detection classes.
class ClassMap
{
public:
  ClassMap() : table_(kIds, KittiClass::Unlabeled) {}

  /// Moving and static variants merged: car, person and bicyclist only.
  static ClassMap defaults()
  {
    ClassMap m;
    m.set(10, KittiClass::Car);
    m.set(252, KittiClass::Car);
    m.set(30, KittiClass::Pedestrian);
    m.set(254, KittiClass::Pedestrian);
    m.set(31, KittiClass::Cyclist);
    m.set(253, KittiClass::Cyclist);
    return m;
  }

  /// Lines of `source_id -> class`; '#' starts a comment. Unlisted ids stay Unlabeled.
  static ClassMap parse(std::string_view text)
  {
    ClassMap m;
    io::detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
      line = line.substr(0, line.find('#'));
      const auto arrow = line.find("->");
      const auto lhs = io::detail::split_ws(line.substr(0, arrow));
      if (arrow == std::string_view::npos) {
        if (!lhs.empty()) {
          throw MalformedLine(line_no, "expected 'source_id -> class'");
        }
        return;
      }
      const auto rhs = io::detail::split_ws(line.substr(arrow + 2));
      if (lhs.size() != 1 || rhs.size() != 1) {
        throw MalformedLine(line_no, "expected 'source_id -> class'");
      }
      unsigned id = 0;
      const auto [ptr, ec] = std::from_chars(lhs[0].data(), lhs[0].data() + lhs[0].size(), id);
      if (ec != std::errc() || ptr != lhs[0].data() + lhs[0].size() || id >= kIds) {
        throw MalformedLine(line_no, "source id must be an integer in [0, 65535]");
      }
      std::string name(rhs[0]);
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
      });
      KittiClass c{};
      if (name == "unlabeled") {
        c = KittiClass::Unlabeled;
      } else if (name == "car") {
        c = KittiClass::Car;
      } else if (name == "pedestrian") {
        c = KittiClass::Pedestrian;
      } else if (name == "cyclist") {
        c = KittiClass::Cyclist;
      } else {
        throw MalformedLine(line_no, "unknown class '" + std::string(rhs[0]) + "'");
      }
      m.set(static_cast<std::uint16_t>(id), c);
    });
    return m;
  }

  void set(std::uint16_t id, KittiClass c) { table_[id] = c; }
  KittiClass operator()(std::uint16_t id) const { return table_[id]; }

private:
  static constexpr std::size_t kIds = 1U << 16;
  std::vector<KittiClass> table_;
};

inline KittiClass map_class(std::uint16_t semantic_id, const ClassMap & map) { return map(semantic_id); }

inline std::array<float, kNumKittiClasses> one_hot(KittiClass c)
{
  std::array<float, kNumKittiClasses> v{};
  v[index_of(c)] = 1.0F;
  return v;
}

/// Max-subtracted softmax, evaluated in double.
inline std::array<float, kNumKittiClasses> softmax(const ClassScores & scores)
{
  const double m = *std::max_element(scores.begin(), scores.end());
  std::array<double, kNumKittiClasses> e{};
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumKittiClasses; ++k) {
    e[k] = std::exp(static_cast<double>(scores[k]) - m);
    sum += e[k];
  }
  std::array<float, kNumKittiClasses> out{};
  for (std::size_t k = 0; k < kNumKittiClasses; ++k) {
    out[k] = static_cast<float>(e[k] / sum);
  }
  return out;
}

namespace detail
{
inline FusedPoint concat(const Point & p, const std::array<float, kNumKittiClasses> & s)
{
  return {p.x, p.y, p.z, p.r, s[0], s[1], s[2], s[3]};
}
}  // namespace detail

/// Label mode: appends one_hot(map(semantic_id)) to every point, order preserved.
inline FusedPointCloud concat_sem_feature(
  const SemanticLabelMap & labels, const PointCloud & pc, const ClassMap & map)
{
  if (labels.size() != pc.size()) {
    throw LengthMismatch(pc.size(), labels.size());
  }
  FusedPointCloud out;
  out.reserve(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    out.push_back(detail::concat(pc[i], one_hot(map(labels[i].semantic_id))));
  }
  return out;
}

/// Score mode: appends softmax(scores[i]) to every point.
inline FusedPointCloud concat_score_feature(const ClassScoreMap & scores, const PointCloud & pc)
{
  if (scores.size() != pc.size()) {
    throw LengthMismatch(pc.size(), scores.size());
  }
  FusedPointCloud out;
  out.reserve(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (const float s : scores[i]) {
      if (!std::isfinite(s)) {
        throw NonFiniteScore(i);
      }
    }
    out.push_back(detail::concat(pc[i], softmax(scores[i])));
  }
  return out;
}

inline PointCloud strip_semantics(const FusedPointCloud & fpc)
{
  PointCloud out;
  out.reserve(fpc.size());
  for (const auto & f : fpc) {
    out.push_back({f[0], f[1], f[2], f[3]});
  }
  return out;
}

/// Index of the largest semantic component (first wins on ties).
inline KittiClass dominant_class(const FusedPoint & f)
{
  const auto first = f.begin() + kGeometryWidth;
  return static_cast<KittiClass>(std::max_element(first, f.end()) - first);
}

inline KittiClass dominant_class(const ClassScores & s)
{
  return static_cast<KittiClass>(std::max_element(s.begin(), s.end()) - s.begin());
}

}  // namespace semfuse::fusion

#endif  // SEMFUSE__SEMANTIC_FUSION_HPP_
