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

#ifndef SEMFUSE__KITTI_IO_HPP_
#define SEMFUSE__KITTI_IO_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semfuse/calibration.hpp"
#include "semfuse/errors.hpp"
#include "semfuse/geometry.hpp"
#include "semfuse/types.hpp"

namespace semfuse::io
{

using Bytes = std::vector<std::byte>;

// --- Little-endian primitives ----------------------------------------------

inline std::uint32_t load_u32_le(const std::byte * p)
{
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void store_u32_le(std::uint32_t v, std::byte * out)
{
  out[0] = static_cast<std::byte>(v & 0xFFU);
  out[1] = static_cast<std::byte>((v >> 8) & 0xFFU);
  out[2] = static_cast<std::byte>((v >> 16) & 0xFFU);
  out[3] = static_cast<std::byte>((v >> 24) & 0xFFU);
}

inline float load_f32_le(const std::byte * p) { return std::bit_cast<float>(load_u32_le(p)); }
inline void store_f32_le(float v, std::byte * out) { store_u32_le(std::bit_cast<std::uint32_t>(v), out); }

/// Decodes a flat stream of float32 records of `width` values each.
template <std::size_t Width>
std::vector<std::array<float, Width>> parse_float_records(std::span<const std::byte> bytes)
{
  constexpr std::size_t kRecord = Width * 4;
  if (bytes.size() % kRecord != 0) {
    throw TruncatedFile(bytes.size(), kRecord);
  }
  std::vector<std::array<float, Width>> out(bytes.size() / kRecord);
  const std::byte * p = bytes.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < Width; ++k, p += 4) {
      const float v = load_f32_le(p);
      if (!std::isfinite(v)) {
        throw NonFiniteValue(i, k);
      }
      out[i][k] = v;
    }
  }
  return out;
}

template <std::size_t Width>
Bytes write_float_records(std::span<const std::array<float, Width>> records)
{
  Bytes out(records.size() * Width * 4);
  std::byte * p = out.data();
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t k = 0; k < Width; ++k, p += 4) {
      if (!std::isfinite(records[i][k])) {
        throw NonFiniteValue(i, k);
      }
      store_f32_le(records[i][k], p);
    }
  }
  return out;
}

// --- Files -----------------------------------------------------------------

inline Bytes read_file(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  Bytes out(data.size());
  std::memcpy(out.data(), data.data(), data.size());
  return out;
}

inline std::string read_text_file(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path & path, std::span<const std::byte> bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_text_file(const std::filesystem::path & path, std::string_view text)
{
  write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

// --- Velodyne scans (.bin) -------------------------------------------------

struct VelodyneStats
{
  std::size_t clamped_reflectance = 0;
};

/// N x (x, y, z, r) little-endian float32. Reflectance outside [0, 1] is clamped and counted.
inline PointCloud parse_velodyne(std::span<const std::byte> bytes, VelodyneStats * stats = nullptr)
{
  const auto records = parse_float_records<4>(bytes);
  PointCloud cloud;
  cloud.reserve(records.size());
  std::size_t clamped = 0;
  for (const auto & r : records) {
    float refl = r[3];
    if (refl < 0.0F || refl > 1.0F) {
      refl = std::clamp(refl, 0.0F, 1.0F);
      ++clamped;
    }
    cloud.push_back({r[0], r[1], r[2], refl});
  }
  if (stats != nullptr) {
    stats->clamped_reflectance += clamped;
  }
  return cloud;
}

inline Bytes write_velodyne(const PointCloud & cloud)
{
  std::vector<std::array<float, 4>> records;
  records.reserve(cloud.size());
  for (const auto & p : cloud) {
    records.push_back({p.x, p.y, p.z, p.r});
  }
  return write_float_records<4>(std::span<const std::array<float, 4>>(records));
}

// --- Semantic labels (.label) ----------------------------------------------

/// Low 16 bits: semantic class; high 16 bits: instance.
constexpr SemanticLabel decode_label(std::uint32_t word)
{
  return {static_cast<std::uint16_t>(word & 0xFFFFU), static_cast<std::uint16_t>(word >> 16)};
}

constexpr std::uint32_t encode_label(SemanticLabel label)
{
  return static_cast<std::uint32_t>(label.semantic_id) |
         (static_cast<std::uint32_t>(label.instance_id) << 16);
}

inline SemanticLabelMap parse_semantic_labels(std::span<const std::byte> bytes)
{
  if (bytes.size() % 4 != 0) {
    throw TruncatedFile(bytes.size(), 4);
  }
  SemanticLabelMap out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = decode_label(load_u32_le(bytes.data() + 4 * i));
  }
  return out;
}

inline Bytes write_semantic_labels(const SemanticLabelMap & labels)
{
  Bytes out(labels.size() * 4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    store_u32_le(encode_label(labels[i]), out.data() + 4 * i);
  }
  return out;
}

// --- Fused clouds (.fused.bin) and class scores ----------------------------

inline FusedPointCloud parse_fused(std::span<const std::byte> bytes)
{
  return parse_float_records<kFusedWidth>(bytes);
}

inline Bytes write_fused(const FusedPointCloud & fpc)
{
  return write_float_records<kFusedWidth>(std::span<const FusedPoint>(fpc));
}

/// N x 4 little-endian float32 per-point class scores.
inline ClassScoreMap parse_class_scores(std::span<const std::byte> bytes)
{
  return parse_float_records<kNumKittiClasses>(bytes);
}

inline Bytes write_class_scores(const ClassScoreMap & scores)
{
  return write_float_records<kNumKittiClasses>(std::span<const ClassScores>(scores));
}

// --- Text helpers ----------------------------------------------------------

namespace detail
{

inline std::vector<std::string_view> split_ws(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
    }
    if (i > start) {
      out.push_back(line.substr(start, i - start));
    }
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s)
{
  if (!s.empty() && s.front() == '+') {
    s.remove_prefix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

template <class Fn>
void for_each_line(std::string_view text, Fn && fn)
{
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    fn(++line_no, line);
    if (nl == std::string_view::npos) {
      break;
    }
    text.remove_prefix(nl + 1);
  }
}

inline std::string format_double(const char * fmt, double v)
{
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), fmt, v);
  return {buf, static_cast<std::size_t>(n)};
}

}  // namespace detail

// --- Calibration -----------------------------------------------------------

inline Calibration parse_calibration(std::string_view text)
{
  Calibration calib;
  bool have_p2 = false;
  bool have_r0 = false;
  bool have_tr = false;
  detail::for_each_line(text, [&](std::size_t, std::string_view line) {
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) {
      return;
    }
    const std::string_view key = line.substr(0, colon);
    const auto fields = detail::split_ws(line.substr(colon + 1));
    const auto fill = [&](auto & m, std::size_t rows, std::size_t cols) {
      if (fields.size() != rows * cols) {
        throw MalformedMatrix(
          std::string(key) + ": expected " + std::to_string(rows * cols) + " values, got " +
          std::to_string(fields.size()));
      }
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto v = detail::to_double(fields[i]);
        if (!v) {
          throw MalformedMatrix(std::string(key) + ": bad value '" + std::string(fields[i]) + "'");
        }
        m(static_cast<Eigen::Index>(i / cols), static_cast<Eigen::Index>(i % cols)) = *v;
      }
    };
    if (key == "P2") {
      fill(calib.p2, 3, 4);
      have_p2 = true;
    } else if (key == "R0_rect") {
      fill(calib.r0_rect, 3, 3);
      have_r0 = true;
    } else if (key == "Tr_velo_to_cam") {
      fill(calib.tr_velo_to_cam, 3, 4);
      have_tr = true;
    }
  });
  if (!have_p2) throw MissingKey("P2");
  if (!have_r0) throw MissingKey("R0_rect");
  if (!have_tr) throw MissingKey("Tr_velo_to_cam");
  return calib;
}

inline std::string write_calibration(const Calibration & calib)
{
  std::string out;
  const auto row = [&](const char * key, const auto & m) {
    out += key;
    out += ':';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        out += ' ';
        out += detail::format_double("%.17g", m(r, c));
      }
    }
    out += '\n';
  };
  row("P2", calib.p2);
  row("R0_rect", calib.r0_rect);
  row("Tr_velo_to_cam", calib.tr_velo_to_cam);
  return out;
}

// --- Object labels and detections ------------------------------------------

/// One row of a KITTI label or detection file, camera frame.
struct KittiObject
{
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox{};  // left, top, right, bottom (pixels)
  std::array<double, 3> dimensions{};  // h, w, l
  std::array<double, 3> location{};  // x, y, z of the bottom-face center
  double rotation_y = 0.0;
  std::optional<double> score;

  bool is_dont_care() const { return type == "DontCare"; }
  double bbox_height() const { return bbox[3] - bbox[1]; }
};

using GroundTruthObject = KittiObject;

inline std::vector<KittiObject> parse_object_labels(std::string_view text)
{
  std::vector<KittiObject> out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto f = detail::split_ws(line);
    if (f.empty()) {
      return;
    }
    if (f.size() != 15 && f.size() != 16) {
      throw MalformedLine(line_no, "expected 15 or 16 fields, got " + std::to_string(f.size()));
    }
    std::array<double, 15> v{};
    for (std::size_t i = 1; i < f.size(); ++i) {
      const auto d = detail::to_double(f[i]);
      if (!d) {
        throw MalformedLine(line_no, "field " + std::to_string(i + 1) + " is not numeric");
      }
      v[i - 1] = *d;
    }
    KittiObject o;
    o.type = std::string(f[0]);
    o.truncation = v[0];
    if (v[1] != std::floor(v[1]) || v[1] < -1.0 || v[1] > 3.0) {
      throw MalformedLine(line_no, "occlusion must be an integer in [-1, 3]");
    }
    o.occlusion = static_cast<int>(v[1]);
    o.alpha = v[2];
    o.bbox = {v[3], v[4], v[5], v[6]};
    o.dimensions = {v[7], v[8], v[9]};
    o.location = {v[10], v[11], v[12]};
    o.rotation_y = v[13];
    if (f.size() == 16) {
      o.score = v[14];
    }
    if (o.bbox[2] < o.bbox[0] || o.bbox[3] < o.bbox[1]) {
      throw MalformedLine(line_no, "inverted 2D box");
    }
    if (!o.is_dont_care() && (o.dimensions[0] <= 0 || o.dimensions[1] <= 0 || o.dimensions[2] <= 0)) {
      throw MalformedLine(line_no, "non-positive dimensions");
    }
    out.push_back(std::move(o));
  });
  return out;
}

inline std::string write_object_label(const KittiObject & o)
{
  using detail::format_double;
  std::string s = o.type;
  const auto add = [&](const char * fmt, double v) {
    s += ' ';
    s += format_double(fmt, v);
  };
  add("%.2f", o.truncation);
  s += ' ' + std::to_string(o.occlusion);
  add("%.6f", o.alpha);
  for (const double b : o.bbox) add("%.6f", b);
  for (const double d : o.dimensions) add("%.6f", d);
  for (const double l : o.location) add("%.6f", l);
  add("%.6f", o.rotation_y);
  if (o.score) {
    add("%.6f", *o.score);
  }
  s += '\n';
  return s;
}

inline std::string write_object_labels(std::span<const KittiObject> objects)
{
  std::string out;
  for (const auto & o : objects) {
    out += write_object_label(o);
  }
  return out;
}

/// Camera-frame label -> LiDAR-frame box. The heading follows the usual
/// ry = -yaw - pi/2 convention; centers go through the full calibration.
inline Box3D box_from_camera_object(const KittiObject & o, const Calibration & calib)
{
  const double h = o.dimensions[0];
  const Eigen::Vector3d bottom(o.location[0], o.location[1], o.location[2]);
  const Eigen::Vector3d center = calib.rect_to_lidar(bottom - Eigen::Vector3d(0.0, 0.5 * h, 0.0));
  Box3D b;
  b.x = center.x();
  b.y = center.y();
  b.z = center.z();
  b.h = h;
  b.w = o.dimensions[1];
  b.l = o.dimensions[2];
  b.yaw = geometry::normalize_angle(-o.rotation_y - 0.5 * std::numbers::pi);
  b.cls = class_from_name(o.type).value_or(KittiClass::Unlabeled);
  b.score = o.score;
  return b;
}

inline KittiObject camera_object_from_box(const Box3D & b, const Calibration & calib)
{
  KittiObject o;
  o.type = std::string(class_name(b.cls));
  o.truncation = -1.0;
  o.occlusion = -1;
  const Eigen::Vector3d center = calib.lidar_to_rect({b.x, b.y, b.z});
  const Eigen::Vector3d bottom = center + Eigen::Vector3d(0.0, 0.5 * b.h, 0.0);
  o.location = {bottom.x(), bottom.y(), bottom.z()};
  o.dimensions = {b.h, b.w, b.l};
  o.rotation_y = geometry::normalize_angle(-b.yaw - 0.5 * std::numbers::pi);
  o.alpha = geometry::normalize_angle(o.rotation_y - std::atan2(bottom.x(), bottom.z()));

  const geometry::LidarProjector project(calib);
  double left = 0.0, top = 0.0, right = 0.0, bot = 0.0;
  bool any = false;
  for (const auto & c : geometry::box_corners(b)) {
    const auto ip = project(c);
    if (!ip) {
      continue;
    }
    if (!any) {
      left = right = ip->u;
      top = bot = ip->v;
      any = true;
    } else {
      left = std::min(left, ip->u);
      right = std::max(right, ip->u);
      top = std::min(top, ip->v);
      bot = std::max(bot, ip->v);
    }
  }
  o.bbox = {left, top, right, bot};
  o.score = b.score;
  return o;
}

/// KITTI submission text (16 fields, trailing score), one line per detection.
inline std::string write_detections(std::span<const Box3D> dets, const Calibration & calib)
{
  std::string out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!dets[i].score || !std::isfinite(*dets[i].score)) {
      throw MissingScore("detection " + std::to_string(i) + " has no finite score");
    }
    out += write_object_label(camera_object_from_box(dets[i], calib));
  }
  return out;
}

// --- Tensor dumps ----------------------------------------------------------

/// One text line "float32 d0 d1 ...\n" followed by the little-endian payload.
inline Bytes write_tensor_dump(std::span<const std::size_t> shape, std::span<const float> data)
{
  std::string header = "float32";
  std::size_t count = 1;
  for (const auto d : shape) {
    header += ' ' + std::to_string(d);
    count *= d;
  }
  header += '\n';
  if (count != data.size()) {
    throw LengthMismatch(count, data.size());
  }
  Bytes out(header.size() + data.size() * 4);
  std::memcpy(out.data(), header.data(), header.size());
  std::byte * p = out.data() + header.size();
  for (const float v : data) {
    store_f32_le(v, p);
    p += 4;
  }
  return out;
}

struct TensorDump
{
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

inline TensorDump parse_tensor_dump(std::span<const std::byte> bytes)
{
  std::size_t nl = 0;
  while (nl < bytes.size() && bytes[nl] != std::byte{'\n'}) {
    ++nl;
  }
  if (nl == bytes.size()) {
    throw MalformedLine(1, "tensor dump has no header line");
  }
  const std::string header(reinterpret_cast<const char *>(bytes.data()), nl);
  const auto fields = detail::split_ws(header);
  if (fields.empty() || fields[0] != "float32") {
    throw MalformedLine(1, "tensor dump header must start with float32");
  }
  TensorDump out;
  std::size_t count = 1;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    std::size_t d = 0;
    const auto [ptr, ec] = std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), d);
    if (ec != std::errc() || ptr != fields[i].data() + fields[i].size()) {
      throw MalformedLine(1, "bad tensor dimension");
    }
    out.shape.push_back(d);
    count *= d;
  }
  const auto payload = bytes.subspan(nl + 1);
  if (payload.size() != count * 4) {
    throw TruncatedFile(payload.size(), 4);
  }
  out.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.data[i] = load_f32_le(payload.data() + 4 * i);
  }
  return out;
}

// --- Split index files -----------------------------------------------------

/// One frame stem per line; blank lines and '#' comments ignored.
inline std::vector<std::string> parse_split(std::string_view text)
{
  std::vector<std::string> out;
  detail::for_each_line(text, [&](std::size_t, std::string_view line) {
    const auto f = detail::split_ws(line.substr(0, line.find('#')));
    if (!f.empty()) {
      out.emplace_back(f[0]);
    }
  });
  return out;
}

}  // namespace semfuse::io

#endif  // SEMFUSE__KITTI_IO_HPP_
