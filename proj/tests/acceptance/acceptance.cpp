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

// Acceptance run: one PASS/FAIL line per criterion, full-size workloads.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "semfuse/pipeline.hpp"
#include "semfuse/selftest.hpp"
#include "semfuse/testing/dataset.hpp"

namespace
{

using namespace semfuse;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome
{
  bool passed = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char * name, const Outcome & o)
{
  std::printf("%s [%d] %-28s %s\n", o.passed ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
  failures += o.passed ? 0 : 1;
}

/// A selftest suite at full size, optionally under a time budget.
Outcome suite(const selftest::CheckResult & r, double budget_s)
{
  char buf[96];
  std::snprintf(buf, sizeof buf, " (%.2fs", r.seconds);
  std::string detail = r.detail + buf;
  bool ok = r.passed;
  if (budget_s > 0) {
    std::snprintf(buf, sizeof buf, ", budget %.0fs", budget_s);
    detail += buf;
    ok = ok && r.seconds < budget_s;
  }
  return {ok, detail + ")"};
}

Outcome mode_switch()
{
  const fs::path root = fs::temp_directory_path() / ("semfuse_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  testing::ToyOptions opt;
  opt.frames = 5;
  opt.background = 20000;
  const auto ds = testing::write_toy_dataset(root, opt);
  auto c = pipeline::load_pipeline_config(ds.config);
  std::ostringstream sink;
  c.mode = pipeline::FusionMode::Label;
  c.fused_dir = root / "fused_label";
  const bool label_ok = pipeline::cmd_fuse(c, sink, sink) == pipeline::ExitCode::Ok;
  c.mode = pipeline::FusionMode::Score;
  c.fused_dir = root / "fused_score";
  const bool score_ok = pipeline::cmd_fuse(c, sink, sink) == pipeline::ExitCode::Ok;
  if (!label_ok || !score_ok) {
    fs::remove_all(root);
    return {false, "fuse failed: " + sink.str()};
  }

  std::size_t points = 0, geometry_diffs = 0, argmax_diffs = 0, semantic_diffs = 0, bad_blocks = 0;
  for (const auto & s : ds.stems) {
    const auto a = io::read_file(root / "fused_label" / (s + ".fused.bin"));
    const auto b = io::read_file(root / "fused_score" / (s + ".fused.bin"));
    if (a.size() != b.size() || a.size() % 32 != 0) return {false, "frame " + s + ": size mismatch"};
    for (std::size_t off = 0; off < a.size(); off += 32) {
      ++points;
      geometry_diffs += std::memcmp(&a[off], &b[off], 16) != 0;
      semantic_diffs += std::memcmp(&a[off + 16], &b[off + 16], 16) != 0;
    }
    const auto la = io::parse_fused(a);
    const auto sb = io::parse_fused(b);
    for (std::size_t i = 0; i < la.size(); ++i) {
      argmax_diffs += fusion::dominant_class(la[i]) != fusion::dominant_class(sb[i]);
      double sum = 0.0;
      int ones = 0, zeros = 0;
      for (std::size_t k = 4; k < 8; ++k) {
        sum += sb[i][k];
        ones += la[i][k] == 1.0F;
        zeros += la[i][k] == 0.0F;
      }
      bad_blocks += !(std::abs(sum - 1.0) <= 1e-5) || ones != 1 || zeros != 3;
    }
  }
  fs::remove_all(root);
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu points: geometry bytes differ %zu, argmax differs %zu, semantic blocks differ %zu",
                points, geometry_diffs, argmax_diffs, semantic_diffs);
  return {points > 0 && geometry_diffs == 0 && argmax_diffs == 0 && bad_blocks == 0 && semantic_diffs > 0, buf};
}

Outcome throughput()
{
  Rng rng(2024);
  const auto pc = testing::random_cloud(120000, rng);
  const auto labels = testing::random_labels(pc.size(), rng);
  const auto velo_bytes = io::write_velodyne(pc);
  const auto label_bytes = io::write_semantic_labels(labels);
  const auto map = fusion::ClassMap::defaults();
  const encoders::GridConfig grid;

  // parse, fuse and pillarize from in-memory file bytes; median of 7 runs
  std::vector<double> ms;
  std::size_t pillars = 0;
  for (int run = 0; run < 7; ++run) {
    const auto t0 = Clock::now();
    const auto fused = fusion::concat_sem_feature(io::parse_semantic_labels(label_bytes), io::parse_velodyne(velo_bytes), map);
    Rng frame_rng = Rng::for_frame(0, "throughput");
    const auto t = encoders::pillarize(fused, grid, frame_rng);
    ms.push_back(1000.0 * seconds_since(t0));
    pillars = t.num_pillars;
  }
  std::sort(ms.begin(), ms.end());
  const double frame_ms = ms[ms.size() / 2];

  std::ostringstream table;
  const auto t0 = Clock::now();
  const bool selftest_ok = selftest::run_selftest(table, {}, selftest::default_selftest_sizes());
  const double selftest_s = seconds_since(t0);

  char buf[200];
  std::snprintf(buf, sizeof buf, "fuse+pillarize 120k points: %.1f ms median (%zu pillars, budget 100 ms); selftest %s in %.1fs (budget 300s)",
                frame_ms, pillars, selftest_ok ? "passed" : "FAILED", selftest_s);
  return {frame_ms < 100.0 && selftest_ok && selftest_s < 300.0, buf};
}

}  // namespace

int main()
{
  const selftest::Sizes full;  // 1000 frames, 1000 pairs x 1e6 samples, 200 scenarios, ...
  const selftest::Hooks hooks;

  report(1, "fusion correctness", suite(selftest::check_fusion(full), 30.0));
  report(2, "rotated IoU oracle", suite(selftest::check_iou_oracle(full, hooks), 120.0));
  report(3, "AP oracle equivalence", suite(selftest::check_ap_oracle(full), 60.0));
  report(4, "gradient checks", suite(selftest::check_gradients(full), 60.0));
  report(5, "encoder invariants", suite(selftest::check_encoders(full), 0.0));
  report(6, "round-trips", suite(selftest::check_roundtrips(full), 0.0));
  report(7, "augmentation contracts", suite(selftest::check_augmentation(full), 0.0));
  report(8, "label/score mode switch", mode_switch());
  report(9, "throughput budget", throughput());

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
