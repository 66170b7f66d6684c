#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mbtl/agent.hpp"
#include "mbtl/checkpoint.hpp"
#include "mbtl/config.hpp"
#include "mbtl/envs.hpp"
#include "mbtl/metrics.hpp"
#include "mbtl/optim.hpp"
#include "mbtl/replay.hpp"
#include "mbtl/transfer.hpp"

namespace mbtl {

using EnvList = std::vector<std::unique_ptr<envs::Env>>;

/// Builds every task of cfg padded to the widest action space. Tasks must
/// agree on the observation size; otherwise ConfigError.
EnvList make_task_envs(const std::vector<std::string>& tasks);

/// Agent dims for cfg.model with obs/action sizes taken from envs.
AgentDims agent_dims_for(const RunConfig& cfg, const EnvList& envs);

enum class CollectMode { random, explore };

/// Exactly one episode per env, in order. random draws uniform actions;
/// explore runs the actor with sampling plus Gaussian noise of scale noise.
std::vector<envs::Episode> collect_episodes(const AgentDims& dims, const ParamStore& params, EnvList& envs,
                                            CollectMode mode, Rng& rng, double noise);

struct EvalResult {
  double mean_return = 0.0;
  std::vector<double> returns;
  std::vector<envs::Episode> episodes;
};

/// n noise-free policy rollouts; rng only drives environment resets.
EvalResult evaluate(const AgentDims& dims, const ParamStore& params, envs::Env& env, std::size_t n, Rng& rng);

/// Transfer map selected by cfg.transfer.mode.
transfer::TransferMap transfer_map_for(const TransferConfig& cfg);

/// Parameters a new run starts from: a fresh agent, with the transfer
/// applied when cfg.transfer.source is set.
ParamStore initial_params(const RunConfig& cfg, const AgentDims& dims, std::uint64_t seed);

/// Drops gradient entries whose names start with any of the prefixes.
ad::Gradients drop_frozen(ad::Gradients grads, const std::vector<std::string>& prefixes);

struct TrainStepStats {
  double wm_loss = 0.0;
  double actor_objective = 0.0;
  double value_loss = 0.0;
};

/// Dreamer training loop for one seed, writing into run_dir:
///   checkpoint.json  params and full loop state, rewritten at each eval
///   replay.json      episode dataset at the same points
///   metrics.jsonl    one record per task per evaluation
///   final.json       params when the budget is spent
class Trainer {
 public:
  /// A new run; `start` overrides the initial parameters.
  Trainer(RunConfig cfg, std::uint64_t seed, std::filesystem::path run_dir,
          std::optional<ParamStore> start = std::nullopt);
  /// Continues the run saved in run_dir.
  static Trainer resume(const std::filesystem::path& run_dir);

  /// Runs until the budget is spent. With stop_after >= 0 it returns after
  /// the first evaluation at or beyond that many env steps.
  void run(long stop_after = -1);

  /// One dynamics + behavior update on a sampled batch.
  TrainStepStats train_step();

  const RunConfig& config() const { return cfg_; }
  const AgentDims& dims() const { return dims_; }
  const ParamStore& params() const { return params_; }
  const ReplayDataset& data() const { return data_; }
  long env_steps() const { return env_steps_; }
  bool finished() const { return finished_; }

 private:
  Trainer(RunConfig cfg, std::uint64_t seed, std::filesystem::path run_dir, int);

  void start_fresh(std::optional<ParamStore> start);
  void evaluate_and_log();
  void save_state() const;
  void write_final() const;
  Checkpoint snapshot() const;

  RunConfig cfg_;
  std::uint64_t seed_;
  std::filesystem::path dir_;
  EnvList envs_;
  AgentDims dims_;
  WorldModel wm_;
  ParamStore params_;
  ParamStore slow_value_;  // value/ entries used for imagined returns
  long updates_ = 0;
  ReplayDataset data_;
  Adam wm_opt_, actor_opt_, value_opt_;
  Rng train_rng_, collect_rng_;
  long env_steps_ = 0;
  long next_eval_ = 0;
  long last_eval_ = -1;
  bool finished_ = false;
  std::unique_ptr<MetricsWriter> metrics_;
  double wall_start_ = 0.0;
};

}  // namespace mbtl
