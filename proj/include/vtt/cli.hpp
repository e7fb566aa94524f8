#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vtt/data.hpp"
#include "vtt/environment.hpp"
#include "vtt/eval.hpp"
#include "vtt/learn.hpp"
#include "vtt/responders.hpp"

namespace vtt::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kNumericError = 4 };

enum class Scheme : std::uint8_t { MonteCarlo, QLearning };

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "vtt_out";

  DatasetConfig data;
  std::optional<std::filesystem::path> annotations;
  SplitSpec split;

  EpisodeConfig environment;
  // Unset: on for Q-learning, off for MC.
  std::optional<bool> terminal_tuples;

  Scheme scheme = Scheme::QLearning;
  TrainConfig training;
  PolicyConfig policy;
  ReplayConfig replay;
  int repetitions = 5;
  // Replaces the "train" sub-stream of the master seed.
  std::optional<std::uint64_t> training_seed;
  std::optional<std::filesystem::path> checkpoint;

  std::vector<ResponderSpec> responders;
  std::vector<std::string> qs;
  int grid_points = kDefaultGridPoints;
  int rollouts = 64;
};

// Throws ConfigError naming the offending JSON path (e.g. "$.training.epochs").
// A seed override replaces "seed" before any derived default is computed.
RunConfig parse_run_config(const std::string& json_text,
                           std::optional<std::uint64_t> seed_override = {});
RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed_override = {});

// Sub-stream seeds derived from the master seed.
std::uint64_t data_seed(const RunConfig& cfg);
std::uint64_t train_seed(const RunConfig& cfg);
std::uint64_t eval_seed(const RunConfig& cfg);

// The dataset a command works on: generated from the data seed (or loaded
// from annotations) and split with a stream derived from it.
struct Workspace {
  std::vector<GroundTruthImage> images;
  DatasetSplit split;
};
Workspace load_workspace(const RunConfig& cfg);

int run(int argc, char** argv);

}  // namespace vtt::cli
