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

// Corpus-level commands behind the `semfuse` CLI. Frames are processed one at a
// time by a small worker pool; every frame draws from its own seeded stream and
// manifests are written serially in frame order, so reruns are byte-identical.

#ifndef SEMFUSE__PIPELINE_HPP_
#define SEMFUSE__PIPELINE_HPP_

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "semfuse/augmentation.hpp"
#include "semfuse/config.hpp"
#include "semfuse/encoders.hpp"
#include "semfuse/errors.hpp"
#include "semfuse/evaluation.hpp"
#include "semfuse/geometry.hpp"
#include "semfuse/kitti_io.hpp"
#include "semfuse/rng.hpp"
#include "semfuse/semantic_fusion.hpp"

namespace semfuse::pipeline
{

namespace fs = std::filesystem;

enum class ExitCode : int { Ok = 0, FrameFailure = 1, ConfigError = 2 };

enum class FusionMode { Label, Score };

enum class EncoderKind { Pillar, Voxel, Cylinder };

inline std::optional<FusionMode> parse_mode(std::string_view s)
{
  if (s == "label") return FusionMode::Label;
  if (s == "score") return FusionMode::Score;
  return std::nullopt;
}

inline std::string_view mode_name(FusionMode m) { return m == FusionMode::Label ? "label" : "score"; }

inline std::optional<EncoderKind> parse_encoder(std::string_view s)
{
  if (s == "pillar") return EncoderKind::Pillar;
  if (s == "voxel") return EncoderKind::Voxel;
  if (s == "cylinder") return EncoderKind::Cylinder;
  return std::nullopt;
}

inline std::string_view encoder_name(EncoderKind e)
{
  switch (e) {
    case EncoderKind::Pillar: return "pillar";
    case EncoderKind::Voxel: return "voxel";
    case EncoderKind::Cylinder: return "cylinder";
  }
  return "?";
}

// --- Config ----------------------------------------------------------------

struct PipelineConfig
{
  fs::path velodyne_dir;
  fs::path semantic_dir;  // <stem>.label
  fs::path scores_dir;  // <stem>.scores, N x 4 float32 logits
  fs::path calib_dir;
  fs::path label_dir;
  fs::path detection_dir;
  fs::path fused_dir;
  fs::path output_dir;
  fs::path split;

  FusionMode mode = FusionMode::Label;
  std::uint64_t seed = 0;  // global seed; every frame draws from Rng::for_frame(seed, stem)
  std::size_t workers = 1;
  evaluation::Interpolation interpolation = evaluation::Interpolation::R40;
  int image_width = 1242;
  int image_height = 375;
  std::vector<double> jitter{0.0, 0.005, 0.01, 0.02};

  fusion::ClassMap class_map = fusion::ClassMap::defaults();
  encoders::GridConfig grid;
  augmentation::AugmentConfig augment;
};

/// Paths in the file are relative to the file's directory. Input paths must exist;
/// `fused_dir` and `output_dir` are created by the commands that write them.
inline PipelineConfig parse_pipeline_config(std::string_view text, const fs::path & base_dir)
{
  const auto j = config::detail::parse(text, "pipeline config");
  config::detail::check_keys(
    j, "pipeline config",
    {"velodyne_dir", "semantic_dir", "scores_dir", "calib_dir", "label_dir", "detection_dir", "fused_dir", "output_dir",
     "split", "class_map", "grid_config", "augment_config", "mode", "seed", "workers", "interpolation", "image_width",
     "image_height", "jitter"});
  PipelineConfig c;
  auto path = [&](const char * key, bool must_exist) {
    if (!j.contains(key)) return fs::path{};
    if (!j.at(key).is_string()) throw InvalidConfig(std::string(key) + ": expected a path");
    fs::path p = j.at(key).get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    p = p.lexically_normal();
    if (must_exist && !fs::exists(p)) {
      throw InvalidConfig(std::string(key) + ": '" + p.string() + "' does not exist");
    }
    return p;
  };
  c.velodyne_dir = path("velodyne_dir", true);
  c.semantic_dir = path("semantic_dir", true);
  c.scores_dir = path("scores_dir", true);
  c.calib_dir = path("calib_dir", true);
  c.label_dir = path("label_dir", true);
  c.detection_dir = path("detection_dir", true);
  c.fused_dir = path("fused_dir", false);
  c.output_dir = path("output_dir", false);
  c.split = path("split", true);
  if (const auto p = path("class_map", true); !p.empty()) {
    c.class_map = fusion::ClassMap::parse(io::read_text_file(p));
  }
  if (const auto p = path("grid_config", true); !p.empty()) {
    c.grid = config::parse_grid_config(io::read_text_file(p));
  }
  if (const auto p = path("augment_config", true); !p.empty()) {
    c.augment = config::parse_augment_config(io::read_text_file(p));
  }
  if (j.contains("mode")) {
    const auto m = j.at("mode").is_string() ? parse_mode(j.at("mode").get<std::string>()) : std::nullopt;
    if (!m) throw InvalidConfig("mode: expected \"label\" or \"score\"");
    c.mode = *m;
  }
  if (j.contains("interpolation")) {
    const auto s = j.at("interpolation").is_string() ? j.at("interpolation").get<std::string>() : "";
    if (s == "R40") c.interpolation = evaluation::Interpolation::R40;
    else if (s == "R11") c.interpolation = evaluation::Interpolation::R11;
    else throw InvalidConfig("interpolation: expected \"R40\" or \"R11\"");
  }
  config::detail::read(j, "seed", c.seed);
  config::detail::read(j, "workers", c.workers);
  config::detail::read(j, "image_width", c.image_width);
  config::detail::read(j, "image_height", c.image_height);
  config::detail::read(j, "jitter", c.jitter);
  if (c.workers == 0) throw InvalidConfig("workers must be positive");
  if (c.image_width <= 0 || c.image_height <= 0) throw InvalidConfig("image size must be positive");
  for (const double v : c.jitter) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidConfig("jitter magnitudes must be finite and non-negative");
  }
  return c;
}

inline PipelineConfig load_pipeline_config(const fs::path & file)
{
  if (!fs::exists(file)) {
    throw InvalidConfig("config file '" + file.string() + "' does not exist");
  }
  return parse_pipeline_config(io::read_text_file(file), fs::absolute(file).parent_path());
}

// --- Utilities -------------------------------------------------------------

inline std::string sha256_hex(std::span<const std::byte> bytes)
{
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

inline std::string sha256_hex(std::string_view text)
{
  return sha256_hex(std::as_bytes(std::span(text.data(), text.size())));
}

/// Frame stems: the split file when given, otherwise the sorted stems of `dir/*suffix`.
inline std::vector<std::string> list_frames(const PipelineConfig & c, const fs::path & dir, std::string_view suffix)
{
  if (!c.split.empty()) {
    return io::parse_split(io::read_text_file(c.split));
  }
  if (dir.empty()) {
    throw InvalidConfig("no split file and no input directory to list frames from");
  }
  std::vector<std::string> stems;
  for (const auto & e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix)) {
      stems.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

inline fs::path frame_file(const fs::path & dir, const std::string & stem, std::string_view suffix)
{
  return dir / (stem + std::string(suffix));
}

inline void require_dir(const fs::path & dir, const char * key)
{
  if (dir.empty()) throw InvalidConfig(std::string(key) + " is not set");
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)> & fn)
{
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

/// Per-frame outcome: a manifest record on success, an error message otherwise.
struct FrameResult
{
  bool ok = false;
  std::string record;
  std::string error;
};

template <class Fn>
std::vector<FrameResult> run_frames(const std::vector<std::string> & stems, std::size_t workers, Fn && process)
{
  std::vector<FrameResult> results(stems.size());
  parallel_for(stems.size(), workers, [&](std::size_t i) {
    try {
      results[i].record = process(stems[i]);
      results[i].ok = true;
    } catch (const std::exception & e) {
      results[i].error = e.what();
    }
  });
  return results;
}

/// Writes the manifest (header line, one record per frame) and logs failures.
inline std::size_t write_manifest(
  const fs::path & path, std::string_view header, const std::vector<std::string> & stems,
  const std::vector<FrameResult> & results, std::ostream & log)
{
  std::string text = std::string(header) + "\n";
  std::size_t failed = 0;
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (results[i].ok) {
      text += stems[i] + " " + results[i].record + "\n";
    } else {
      ++failed;
      text += stems[i] + " FAILED\n";
      log << "frame " << stems[i] << ": " << results[i].error << "\n";
    }
  }
  io::write_text_file(path, text);
  return failed;
}

// --- fuse ------------------------------------------------------------------

/// Fuses one frame in memory. Label mode reads `<stem>.label`, score mode `<stem>.scores`.
inline FusedPointCloud fuse_frame(const PipelineConfig & c, const std::string & stem)
{
  const auto pc = io::parse_velodyne(io::read_file(frame_file(c.velodyne_dir, stem, ".bin")));
  if (c.mode == FusionMode::Label) {
    const auto labels = io::parse_semantic_labels(io::read_file(frame_file(c.semantic_dir, stem, ".label")));
    return fusion::concat_sem_feature(labels, pc, c.class_map);
  }
  const auto scores = io::parse_class_scores(io::read_file(frame_file(c.scores_dir, stem, ".scores")));
  return fusion::concat_score_feature(scores, pc);
}

inline ExitCode cmd_fuse(const PipelineConfig & c, std::ostream & out = std::cout, std::ostream & log = std::cerr)
{
  require_dir(c.velodyne_dir, "velodyne_dir");
  require_dir(c.fused_dir, "fused_dir");
  require_dir(c.mode == FusionMode::Label ? c.semantic_dir : c.scores_dir,
              c.mode == FusionMode::Label ? "semantic_dir" : "scores_dir");
  const auto stems = list_frames(c, c.velodyne_dir, ".bin");
  fs::create_directories(c.fused_dir);
  std::array<std::atomic<std::uint64_t>, kNumKittiClasses> totals{};
  const auto results = run_frames(stems, c.workers, [&](const std::string & stem) {
    const auto fused = fuse_frame(c, stem);
    std::array<std::size_t, kNumKittiClasses> counts{};
    for (const auto & f : fused) ++counts[index_of(fusion::dominant_class(f))];
    const auto bytes = io::write_fused(fused);
    io::write_file(frame_file(c.fused_dir, stem, ".fused.bin"), bytes);
    std::string rec = "points=" + std::to_string(fused.size());
    for (std::size_t k = 0; k < kNumKittiClasses; ++k) {
      totals[k] += counts[k];
      rec += " " + std::string(class_name(static_cast<KittiClass>(k))) + "=" + std::to_string(counts[k]);
    }
    return rec + " sha256=" + sha256_hex(bytes);
  });
  const auto failed = write_manifest(
    c.fused_dir / "manifest.txt",
    "# fuse mode=" + std::string(mode_name(c.mode)) + " seed=" + std::to_string(c.seed), stems, results, log);
  out << "fused " << stems.size() - failed << "/" << stems.size() << " frames";
  for (std::size_t k = 0; k < kNumKittiClasses; ++k) {
    out << " " << class_name(static_cast<KittiClass>(k)) << "=" << totals[k].load();
  }
  out << "\n";
  return failed == 0 ? ExitCode::Ok : ExitCode::FrameFailure;
}

// --- encode ----------------------------------------------------------------

inline std::vector<float> to_floats(const std::vector<std::int64_t> & v)
{
  return {v.begin(), v.end()};
}

template <std::size_t K>
std::vector<float> flatten(const std::vector<std::array<std::int32_t, K>> & v)
{
  std::vector<float> out;
  out.reserve(v.size() * K);
  for (const auto & a : v) out.insert(out.end(), a.begin(), a.end());
  return out;
}

inline ExitCode cmd_encode(
  const PipelineConfig & c, EncoderKind kind, std::ostream & out = std::cout, std::ostream & log = std::cerr)
{
  require_dir(c.fused_dir, "fused_dir");
  require_dir(c.output_dir, "output_dir");
  c.grid.validate();
  const auto stems = list_frames(c, c.fused_dir, ".fused.bin");
  const fs::path dir = c.output_dir / encoder_name(kind);
  fs::create_directories(dir);
  std::mutex mu;
  std::map<std::string, std::size_t> drops;
  const auto results = run_frames(stems, c.workers, [&](const std::string & stem) {
    const auto fused = io::parse_fused(io::read_file(frame_file(c.fused_dir, stem, ".fused.bin")));
    io::Bytes features;
    io::Bytes coords;
    std::vector<std::pair<std::string, std::size_t>> counters;
    std::string rec;
    if (kind == EncoderKind::Pillar) {
      Rng rng = Rng::for_frame(c.seed, stem);
      const auto t = encoders::pillarize(fused, c.grid, rng);
      const std::size_t shape[3] = {t.num_features, t.num_pillars, t.max_points};
      features = io::write_tensor_dump(shape, t.data);
      const std::size_t cshape[2] = {t.num_pillars, 2};
      coords = io::write_tensor_dump(cshape, flatten(t.coords));
      rec = "pillars=" + std::to_string(t.num_pillars) + " retained=" + std::to_string(t.retained());
      counters = {{"out_of_range", t.dropped_out_of_range}, {"subsampled", t.dropped_subsampled},
                  {"capacity", t.dropped_capacity}};
    } else if (kind == EncoderKind::Voxel) {
      const auto v = encoders::voxelize(fused, c.grid);
      const std::size_t shape[3] = {v.size(), v.max_points, v.num_features};
      features = io::write_tensor_dump(shape, v.data);
      const std::size_t cshape[2] = {v.size(), 3};
      coords = io::write_tensor_dump(cshape, flatten(v.coords));
      rec = "voxels=" + std::to_string(v.size()) + " retained=" + std::to_string(v.retained());
      counters = {{"out_of_range", v.dropped_out_of_range}, {"buffer_full", v.dropped_buffer_full},
                  {"voxel_full", v.dropped_voxel_full}};
    } else {
      const auto g = encoders::cyl_partition(fused, c.grid);
      // Per-point cell (rho, phi, z); -1 for dropped points.
      std::vector<float> cells(fused.size() * 3, -1.0F);
      for (std::size_t k = 0; k < g.point_index.size(); ++k) {
        const auto i = g.point_index[k];
        cells[3 * i + 0] = static_cast<float>(g.cells[k].rho);
        cells[3 * i + 1] = static_cast<float>(g.cells[k].phi);
        cells[3 * i + 2] = static_cast<float>(g.cells[k].z);
      }
      const std::size_t shape[2] = {fused.size(), 3};
      features = io::write_tensor_dump(shape, cells);
      const std::size_t pshape[3] = {g.rho_bins, g.phi_bins, g.z_bins};
      coords = io::write_tensor_dump(pshape, std::vector<float>(g.populations.begin(), g.populations.end()));
      rec = "cells=" + std::to_string(g.rho_bins * g.phi_bins * g.z_bins) +
            " retained=" + std::to_string(g.point_index.size());
      counters = {{"rho", g.dropped_rho}, {"z", g.dropped_z}};
    }
    const char * second = kind == EncoderKind::Cylinder ? ".populations.bin" : ".coords.bin";
    io::write_file(frame_file(dir, stem, ".features.bin"), features);
    io::write_file(frame_file(dir, stem, second), coords);
    for (const auto & [name, n] : counters) {
      rec += " dropped_" + name + "=" + std::to_string(n);
    }
    {
      const std::lock_guard lock(mu);
      for (const auto & [name, n] : counters) drops[name] += n;
    }
    return rec + " sha256=" + sha256_hex(features) + ":" + sha256_hex(coords);
  });
  const auto failed = write_manifest(
    dir / "manifest.txt",
    "# encode encoder=" + std::string(encoder_name(kind)) + " seed=" + std::to_string(c.seed), stems, results, log);
  out << "encoded " << stems.size() - failed << "/" << stems.size() << " frames (" << encoder_name(kind) << ")";
  for (const auto & [name, n] : drops) out << " dropped_" << name << "=" << n;
  out << "\n";
  return failed == 0 ? ExitCode::Ok : ExitCode::FrameFailure;
}

// --- augment ---------------------------------------------------------------

/// LiDAR-frame boxes of a label file; DontCare rows are skipped, other non-detection
/// classes stay as Unlabeled obstacles for the collision check.
inline std::vector<Box3D> load_boxes(const PipelineConfig & c, const std::string & stem)
{
  const auto calib_path = frame_file(c.calib_dir, stem, ".txt");
  if (!fs::exists(calib_path)) throw MissingCalibration(calib_path.string());
  const auto calib = io::parse_calibration(io::read_text_file(calib_path));
  std::vector<Box3D> boxes;
  for (const auto & o : io::parse_object_labels(io::read_text_file(frame_file(c.label_dir, stem, ".txt")))) {
    if (!o.is_dont_care()) boxes.push_back(io::box_from_camera_object(o, calib));
  }
  return boxes;
}

inline std::string format_boxes(std::span<const Box3D> boxes)
{
  std::string out;
  char buf[512];
  for (const auto & b : boxes) {
    std::snprintf(buf, sizeof buf, "%s %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", class_name(b.cls).data(), b.x,
                  b.y, b.z, b.w, b.h, b.l, b.yaw);
    out += buf;
  }
  return out;
}

inline std::vector<Box3D> parse_boxes(std::string_view text)
{
  std::vector<Box3D> out;
  io::detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto f = io::detail::split_ws(line);
    if (f.empty()) return;
    if (f.size() != 8) throw MalformedLine(line_no, "expected 8 fields");
    const auto cls = class_from_name(f[0]);
    if (!cls) throw MalformedLine(line_no, "unknown class");
    double v[7];
    for (std::size_t k = 0; k < 7; ++k) {
      const auto d = io::detail::to_double(f[k + 1]);
      if (!d) throw MalformedLine(line_no, "bad number");
      v[k] = *d;
    }
    Box3D b;
    b.cls = *cls;
    b.x = v[0]; b.y = v[1]; b.z = v[2]; b.w = v[3]; b.h = v[4]; b.l = v[5]; b.yaw = v[6];
    out.push_back(b);
  });
  return out;
}

inline ExitCode cmd_augment(const PipelineConfig & c, std::ostream & out = std::cout, std::ostream & log = std::cerr)
{
  require_dir(c.fused_dir, "fused_dir");
  require_dir(c.label_dir, "label_dir");
  require_dir(c.calib_dir, "calib_dir");
  require_dir(c.output_dir, "output_dir");
  c.augment.validate();
  const auto stems = list_frames(c, c.fused_dir, ".fused.bin");
  const fs::path db_dir = c.output_dir / "gt_database";
  fs::create_directories(db_dir);

  // The database is built serially, one frame at a time, keeping only the crops.
  augmentation::GtDatabase db;
  std::string db_manifest = "# gt_database\n";
  std::size_t db_failed = 0;
  for (const auto & stem : stems) {
    try {
      augmentation::GtFrame frame{stem, {io::parse_fused(io::read_file(frame_file(c.fused_dir, stem, ".fused.bin"))),
                                         load_boxes(c, stem)}};
      auto part = augmentation::build_gt_database(std::span(&frame, 1));
      for (std::size_t k = 0; k < kNumKittiClasses; ++k) {
        for (auto & e : part.entries[k]) {
          const std::string name = stem + "_" + std::string(class_name(e.box.cls)) + "_" +
                                   std::to_string(db.entries[k].size()) + ".fused.bin";
          const auto bytes = io::write_fused(e.points);
          io::write_file(db_dir / name, bytes);
          db_manifest += name + " points=" + std::to_string(e.points.size()) + " sha256=" + sha256_hex(bytes) + "\n";
          db.entries[k].push_back(std::move(e));
        }
      }
    } catch (const std::exception & e) {
      ++db_failed;
      log << "frame " << stem << ": " << e.what() << "\n";
    }
  }
  io::write_text_file(db_dir / "manifest.txt", db_manifest);

  std::atomic<std::size_t> placed{0}, rejected{0}, reverted{0};
  const auto results = run_frames(stems, c.workers, [&](const std::string & stem) {
    const auto frame_seed = Rng::frame_seed(c.seed, stem);
    Rng rng(frame_seed);
    augmentation::Scene scene{io::parse_fused(io::read_file(frame_file(c.fused_dir, stem, ".fused.bin"))),
                              load_boxes(c, stem)};
    augmentation::AugmentStats st;
    scene = augmentation::augment(std::move(scene), db, c.augment, rng, &st);
    const auto bytes = io::write_fused(scene.points);
    const auto boxes = format_boxes(scene.boxes);
    io::write_file(frame_file(c.output_dir, stem, ".fused.bin"), bytes);
    io::write_text_file(frame_file(c.output_dir, stem, ".boxes.txt"), boxes);
    placed += st.placed;
    rejected += st.rejected;
    reverted += st.reverted;
    char buf[160];
    std::snprintf(buf, sizeof buf, "flipped=%d rotation=%.17g scale=%.17g", st.flipped ? 1 : 0, st.rotation, st.scale);
    return "seed=" + std::to_string(frame_seed) + " points=" + std::to_string(scene.points.size()) +
           " boxes=" + std::to_string(scene.boxes.size()) + " placed=" + std::to_string(st.placed) +
           " rejected=" + std::to_string(st.rejected) + " reverted=" + std::to_string(st.reverted) + " " + buf +
           " sha256=" + sha256_hex(bytes) + ":" + sha256_hex(boxes);
  });
  const auto failed = write_manifest(
    c.output_dir / "manifest.txt", "# augment seed=" + std::to_string(c.seed), stems, results, log);
  out << "augmented " << stems.size() - failed << "/" << stems.size() << " frames; sampled placed=" << placed
      << " rejected_collisions=" << rejected << " per_box_reverted=" << reverted << "\n";
  return failed == 0 && db_failed == 0 ? ExitCode::Ok : ExitCode::FrameFailure;
}

// --- eval ------------------------------------------------------------------

inline evaluation::EvalReport evaluate_dirs(const PipelineConfig & c)
{
  require_dir(c.label_dir, "label_dir");
  require_dir(c.detection_dir, "detection_dir");
  const auto stems = list_frames(c, c.label_dir, ".txt");
  if (c.split.empty()) {
    const auto det_stems = list_frames(c, c.detection_dir, ".txt");
    for (const auto & s : det_stems) {
      if (!std::binary_search(stems.begin(), stems.end(), s)) {
        throw FrameMismatch("detection frame '" + s + "' has no ground truth");
      }
    }
  }
  std::vector<evaluation::EvalFrame> gts;
  std::vector<evaluation::EvalFrame> dets;
  for (const auto & s : stems) {
    const auto det_path = frame_file(c.detection_dir, s, ".txt");
    if (!fs::exists(det_path)) {
      throw FrameMismatch("ground-truth frame '" + s + "' has no detection file");
    }
    gts.push_back({s, io::parse_object_labels(io::read_text_file(frame_file(c.label_dir, s, ".txt")))});
    dets.push_back({s, io::parse_object_labels(io::read_text_file(det_path))});
  }
  evaluation::EvalConfig cfg;
  cfg.interpolation = c.interpolation;
  return evaluation::evaluate_benchmark(dets, gts, cfg);
}

inline ExitCode cmd_eval(
  const PipelineConfig & c, const std::optional<fs::path> & baseline_report, std::ostream & out = std::cout,
  std::ostream & log = std::cerr)
{
  require_dir(c.output_dir, "output_dir");
  evaluation::EvalReport report;
  try {
    report = evaluate_dirs(c);
  } catch (const Error & e) {
    log << "eval: " << e.what() << "\n";
    return ExitCode::FrameFailure;
  }
  const auto table = report.ap_table();
  const char * interp = c.interpolation == evaluation::Interpolation::R40 ? "R40" : "R11";
  std::string text = evaluation::format_ap_table(table, std::string("AP (") + interp + ")");
  if (baseline_report) {
    const auto baseline = evaluation::parse_report_csv(io::read_text_file(*baseline_report));
    text += "\n" + evaluation::format_ap_table(evaluation::ap_delta(table, baseline), "Delta vs baseline", true);
  }
  fs::create_directories(c.output_dir);
  io::write_text_file(c.output_dir / "report.txt", text);
  io::write_text_file(c.output_dir / "report.csv", evaluation::report_to_csv(report));
  out << text;
  return ExitCode::Ok;
}

// --- diag-projection -------------------------------------------------------

/// Rotation of `magnitude` rad about a random axis plus a translation of `magnitude` m
/// along a random direction. Axis and direction are fixed by `rng`, so a frame sees the
/// same perturbation direction at every magnitude.
inline Calibration jitter_calibration(const Calibration & calib, double magnitude, const Eigen::Vector3d & axis,
                                      const Eigen::Vector3d & direction)
{
  Calibration out = calib;
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(magnitude, axis.normalized()).toRotationMatrix();
  out.tr_velo_to_cam.leftCols<3>() = rot * calib.tr_velo_to_cam.leftCols<3>();
  out.tr_velo_to_cam.col(3) = rot * calib.tr_velo_to_cam.col(3) + magnitude * direction.normalized();
  return out;
}

inline Eigen::Vector3d random_unit(Rng & rng)
{
  Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
  while (v.norm() < 1e-9) v = {rng.normal(), rng.normal(), rng.normal()};
  return v.normalized();
}

struct ProjectionDiag
{
  std::size_t points = 0;
  std::size_t in_image = 0;
  std::size_t behind = 0;
  std::vector<double> flip_rate;  // one per jitter magnitude
  std::vector<std::size_t> compared;

  double in_image_fraction() const { return points == 0 ? 0.0 : static_cast<double>(in_image) / points; }
};

/// Paints the image with each point's label under `calib` (nearest point wins a pixel),
/// then re-projects the visible points under each jittered calibration and counts how
/// often the painted label there differs from the point's own label.
inline ProjectionDiag diagnose_projection(
  const PointCloud & pc, const SemanticLabelMap & labels, const Calibration & calib, int width, int height,
  std::span<const double> jitter, Rng & rng)
{
  if (labels.size() != pc.size()) throw LengthMismatch(pc.size(), labels.size());
  ProjectionDiag d;
  d.points = pc.size();
  const auto W = static_cast<std::size_t>(width);
  const auto H = static_cast<std::size_t>(height);
  std::vector<double> depth(W * H, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> owner(W * H, -1);
  auto pixel = [&](const geometry::ImagePoint & ip) -> std::optional<std::size_t> {
    if (!(ip.u >= 0.0 && ip.u < width && ip.v >= 0.0 && ip.v < height)) return std::nullopt;
    return static_cast<std::size_t>(ip.v) * W + static_cast<std::size_t>(ip.u);
  };
  const geometry::LidarProjector project(calib);
  std::vector<std::optional<std::size_t>> pix(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto ip = project({pc[i].x, pc[i].y, pc[i].z});
    if (!ip) {
      ++d.behind;
      continue;
    }
    pix[i] = pixel(*ip);
    if (!pix[i]) continue;
    ++d.in_image;
    if (ip->depth < depth[*pix[i]]) {
      depth[*pix[i]] = ip->depth;
      owner[*pix[i]] = static_cast<std::int64_t>(i);
    }
  }
  const Eigen::Vector3d axis = random_unit(rng);
  const Eigen::Vector3d direction = random_unit(rng);
  for (const double j : jitter) {
    const geometry::LidarProjector jittered(jitter_calibration(calib, j, axis, direction));
    std::size_t compared = 0;
    std::size_t flips = 0;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      if (!pix[i] || owner[*pix[i]] != static_cast<std::int64_t>(i)) continue;
      const auto ip = jittered({pc[i].x, pc[i].y, pc[i].z});
      const auto p = ip ? pixel(*ip) : std::nullopt;
      if (!p || owner[*p] < 0) continue;
      ++compared;
      flips += labels[static_cast<std::size_t>(owner[*p])].semantic_id != labels[i].semantic_id ? 1 : 0;
    }
    d.compared.push_back(compared);
    d.flip_rate.push_back(compared == 0 ? 0.0 : static_cast<double>(flips) / compared);
  }
  return d;
}

inline ExitCode cmd_diag_projection(
  const PipelineConfig & c, std::ostream & out = std::cout, std::ostream & log = std::cerr)
{
  require_dir(c.velodyne_dir, "velodyne_dir");
  require_dir(c.semantic_dir, "semantic_dir");
  require_dir(c.calib_dir, "calib_dir");
  require_dir(c.output_dir, "output_dir");
  const auto stems = list_frames(c, c.velodyne_dir, ".bin");
  fs::create_directories(c.output_dir);
  std::vector<ProjectionDiag> diags(stems.size());
  const auto results = run_frames(stems, c.workers, [&](const std::string & stem) {
    const auto calib_path = frame_file(c.calib_dir, stem, ".txt");
    if (!fs::exists(calib_path)) throw MissingCalibration(calib_path.string());
    const auto calib = io::parse_calibration(io::read_text_file(calib_path));
    const auto pc = io::parse_velodyne(io::read_file(frame_file(c.velodyne_dir, stem, ".bin")));
    const auto labels = io::parse_semantic_labels(io::read_file(frame_file(c.semantic_dir, stem, ".label")));
    Rng rng = Rng::for_frame(c.seed, stem);
    const auto idx = static_cast<std::size_t>(&stem - stems.data());
    diags[idx] = diagnose_projection(pc, labels, calib, c.image_width, c.image_height, c.jitter, rng);
    return std::string("ok");
  });
  std::string csv = "frame,points,in_image,behind,in_image_fraction,jitter,compared,flip_rate\n";
  std::vector<double> mean_flip(c.jitter.size(), 0.0);
  std::size_t ok = 0;
  double mean_in = 0.0;
  std::size_t failed = 0;
  char buf[256];
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (!results[i].ok) {
      ++failed;
      log << "frame " << stems[i] << ": " << results[i].error << "\n";
      continue;
    }
    const auto & d = diags[i];
    ++ok;
    mean_in += d.in_image_fraction();
    for (std::size_t k = 0; k < c.jitter.size(); ++k) {
      mean_flip[k] += d.flip_rate[k];
      std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.6f,%.6g,%zu,%.6f\n", stems[i].c_str(), d.points, d.in_image,
                    d.behind, d.in_image_fraction(), c.jitter[k], d.compared[k], d.flip_rate[k]);
      csv += buf;
    }
  }
  io::write_text_file(c.output_dir / "diag_projection.csv", csv);
  if (ok > 0) {
    std::snprintf(buf, sizeof buf, "frames=%zu mean_in_image_fraction=%.4f\n", ok, mean_in / ok);
    out << buf;
    for (std::size_t k = 0; k < c.jitter.size(); ++k) {
      std::snprintf(buf, sizeof buf, "jitter=%.6g mean_flip_rate=%.6f\n", c.jitter[k], mean_flip[k] / ok);
      out << buf;
    }
  }
  return failed == 0 ? ExitCode::Ok : ExitCode::FrameFailure;
}

}  // namespace semfuse::pipeline

#endif  // SEMFUSE__PIPELINE_HPP_
