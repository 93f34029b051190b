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

// semfuse: batch commands over KITTI-layout dataset directories.

#include <iostream>
#include <optional>
#include <string>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "semfuse/pipeline.hpp"
#include "semfuse/selftest.hpp"

namespace
{

using semfuse::pipeline::ExitCode;

int code(ExitCode c) { return static_cast<int>(c); }

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"semantic-fusion LiDAR preprocessing, encoding, augmentation and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string mode;
  std::string encoder = "pillar";
  std::string baseline;

  app.add_option("--config", config_path, "pipeline config (JSON)");
  app.add_option("--seed", seed, "global seed (overrides the config)");
  app.add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--mode", mode, "fusion mode (overrides the config)")->check(CLI::IsMember({"label", "score"}));

  auto * fuse = app.add_subcommand("fuse", "concatenate semantic features onto every scan");
  auto * encode = app.add_subcommand("encode", "pillar / voxel / cylinder tensors from fused scans");
  encode->add_option("--encoder", encoder, "encoder")->check(CLI::IsMember({"pillar", "voxel", "cylinder"}));
  auto * augment = app.add_subcommand("augment", "GT database + seeded augmentation of fused scans");
  auto * eval = app.add_subcommand("eval", "KITTI AP tables for a detection directory");
  eval->add_option("--baseline-report", baseline, "report.csv to diff against")->check(CLI::ExistingFile);
  auto * diag = app.add_subcommand("diag-projection", "image-projection coverage and label flips under jitter");
  auto * self = app.add_subcommand("selftest", "run all module property suites");
  for (auto * sub : {fuse, encode, augment, eval, diag, self}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(ExitCode::ConfigError);
  }

  if (self->parsed()) {
    return semfuse::selftest::run_selftest(std::cout) ? 0 : code(ExitCode::FrameFailure);
  }

  semfuse::pipeline::PipelineConfig cfg;
  try {
    if (config_path.empty()) {
      throw semfuse::InvalidConfig("--config is required");
    }
    cfg = semfuse::pipeline::load_pipeline_config(config_path);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (!mode.empty()) cfg.mode = *semfuse::pipeline::parse_mode(mode);
  } catch (const std::exception & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return code(ExitCode::ConfigError);
  }

  try {
    if (fuse->parsed()) return code(semfuse::pipeline::cmd_fuse(cfg));
    if (encode->parsed()) return code(semfuse::pipeline::cmd_encode(cfg, *semfuse::pipeline::parse_encoder(encoder)));
    if (augment->parsed()) return code(semfuse::pipeline::cmd_augment(cfg));
    if (eval->parsed()) {
      std::optional<std::filesystem::path> base;
      if (!baseline.empty()) base = baseline;
      return code(semfuse::pipeline::cmd_eval(cfg, base));
    }
    if (diag->parsed()) return code(semfuse::pipeline::cmd_diag_projection(cfg));
  } catch (const semfuse::InvalidConfig & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return code(ExitCode::ConfigError);
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(ExitCode::FrameFailure);
  }
  return code(ExitCode::ConfigError);
}
