#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbtl/agent.hpp"

namespace mbtl {

inline constexpr int kConfigFormatVersion = 1;

struct TrainConfig {
  std::size_t updates_per_collect = 100;  // C
  std::size_t batch = 16;                 // B
  std::size_t seq_len = 10;               // L
  std::size_t horizon = behavior::kDefaultHorizon;
  double gamma = behavior::kDefaultGamma;
  double lambda = behavior::kDefaultLambda;
  std::size_t imagine_starts = 0;  // 0 imagines from every posterior state
  double explore_noise = 0.3;
  double wm_lr = 3e-3;
  double actor_lr = 1e-3;
  double value_lr = 1e-3;
  double clip_norm = 100.0;
  double kl_weight = 1.0;
  std::size_t target_every = 100;  // slow critic sync period in updates; 0 uses the live critic
};

struct TransferConfig {
  std::string source;  // source checkpoint; empty trains from scratch
  std::string mode = "default";  // default | identity | full | random_init | map
  std::string map_file;          // used by mode "map"
  double omega = 0.2;
};

/// Everything that determines a training run besides the seed.
struct RunConfig {
  std::string run_id = "run";
  std::vector<std::string> tasks;
  std::vector<std::uint64_t> seeds{1};
  long budget = 20000;      // environment steps
  long eval_interval = 0;   // 0 means budget / 100
  std::size_t eval_episodes = 1;
  std::size_t initial_episodes = 1;
  bool log_wall_time = false;
  AgentDims model;          // obs_dim and action_dim are filled from the tasks
  TrainConfig train;
  std::vector<std::string> freeze;  // parameter-name prefixes held fixed
  TransferConfig transfer;

  long effective_eval_interval() const;
  /// Throws ConfigError on any inconsistent value.
  void validate() const;
};

/// {"format_version", "run": {...}, "model": {...}, "train": {...},
///  "transfer": {...}}. Missing keys take defaults; unknown keys are errors.
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace mbtl
