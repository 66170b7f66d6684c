#include "mbtl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mbtl/errors.hpp"

namespace mbtl {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

AdamConfig adam_config(double lr, double clip) { return {.alpha = lr, .clip_norm = clip}; }

constexpr const char* kCheckpointFile = "checkpoint.json";
constexpr const char* kReplayFile = "replay.json";
constexpr const char* kMetricsFile = "metrics.jsonl";
constexpr const char* kFinalFile = "final.json";

}  // namespace

EnvList make_task_envs(const std::vector<std::string>& tasks) {
  if (tasks.empty()) throw ConfigError("no tasks given");
  EnvList raw;
  std::vector<envs::EnvSpec> specs;
  for (const auto& t : tasks) {
    try {
      raw.push_back(envs::make_env(t));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    specs.push_back(raw.back()->spec());
  }
  for (const auto& s : specs) {
    if (s.obs_dim != specs.front().obs_dim) {
      throw ConfigError("tasks '" + specs.front().task_id + "' and '" + s.task_id +
                        "' have different observation sizes");
    }
  }
  const std::size_t width = envs::max_action_dim(specs);
  EnvList out;
  for (auto& e : raw) out.push_back(envs::pad_action_space(std::move(e), width));
  return out;
}

AgentDims agent_dims_for(const RunConfig& cfg, const EnvList& envs) {
  AgentDims d = cfg.model;
  d.obs_dim = envs.front()->spec().obs_dim;
  d.action_dim = envs.front()->spec().action_dim;
  for (const auto& e : envs) {
    if (e->spec().obs_dim != d.obs_dim || e->spec().action_dim != d.action_dim) {
      throw ConfigError("environments are not padded to a common interface");
    }
  }
  return d;
}

std::vector<envs::Episode> collect_episodes(const AgentDims& dims, const ParamStore& params, EnvList& envs,
                                            CollectMode mode, Rng& rng, double noise) {
  std::vector<envs::Episode> out;
  for (auto& env : envs) {
    const auto& spec = env->spec();
    if (spec.obs_dim != dims.obs_dim || spec.action_dim != dims.action_dim) {
      throw std::invalid_argument("collect_episodes: env '" + spec.task_id + "' does not match the agent");
    }
    if (mode == CollectMode::random) {
      out.push_back(envs::run_episode(*env, rng, [&](const std::vector<double>&) {
        std::vector<double> a(spec.action_dim);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = uniform(rng, spec.action_low[i], spec.action_high[i]);
        return a;
      }));
    } else {
      AgentController agent(dims, params);
      out.push_back(envs::run_episode(*env, rng, [&](const std::vector<double>& obs) {
        return agent.act(obs, &rng, noise);
      }));
    }
  }
  return out;
}

EvalResult evaluate(const AgentDims& dims, const ParamStore& params, envs::Env& env, std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("evaluate: n_episodes must be positive");
  if (env.spec().obs_dim != dims.obs_dim || env.spec().action_dim != dims.action_dim) {
    throw std::invalid_argument("evaluate: env '" + env.spec().task_id + "' does not match the agent");
  }
  EvalResult r;
  AgentController agent(dims, params);
  for (std::size_t i = 0; i < n; ++i) {
    agent.reset();
    r.episodes.push_back(envs::run_episode(env, rng, [&](const std::vector<double>& obs) { return agent.act(obs); }));
    r.returns.push_back(r.episodes.back().total_reward());
  }
  r.mean_return = mean(r.returns);
  return r;
}

transfer::TransferMap transfer_map_for(const TransferConfig& cfg) {
  using transfer::TransferMode;
  if (cfg.mode == "default") return transfer::default_dreamer_map(cfg.omega);
  if (cfg.mode == "identity") return transfer::uniform_map(TransferMode::identity());
  if (cfg.mode == "full") return transfer::uniform_map(TransferMode::full());
  if (cfg.mode == "random_init") return transfer::uniform_map(TransferMode::random_init());
  if (cfg.mode == "map") return transfer::map_from_json(read_json_file(cfg.map_file));
  throw ConfigError("unknown transfer mode '" + cfg.mode + "'");
}

ParamStore initial_params(const RunConfig& cfg, const AgentDims& dims, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init"));
  ParamStore fresh = init_agent(dims, rng);
  if (cfg.transfer.source.empty()) return fresh;
  const Checkpoint source = load_checkpoint(cfg.transfer.source);
  try {
    return transfer::apply_transfer(source.params, fresh, transfer_map_for(cfg.transfer));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("source checkpoint does not fit the target agent: ") + e.what());
  }
}

ad::Gradients drop_frozen(ad::Gradients grads, const std::vector<std::string>& prefixes) {
  std::erase_if(grads, [&](const auto& kv) {
    return std::any_of(prefixes.begin(), prefixes.end(),
                       [&](const std::string& p) { return kv.first.starts_with(p); });
  });
  return grads;
}

Trainer::Trainer(RunConfig cfg, std::uint64_t seed, std::filesystem::path run_dir, int)
    : cfg_(std::move(cfg)),
      seed_(seed),
      dir_(std::move(run_dir)),
      envs_(make_task_envs(cfg_.tasks)),
      dims_(agent_dims_for(cfg_, envs_)),
      wm_(dims_.world_model()),
      wm_opt_(adam_config(cfg_.train.wm_lr, cfg_.train.clip_norm)),
      actor_opt_(adam_config(cfg_.train.actor_lr, cfg_.train.clip_norm)),
      value_opt_(adam_config(cfg_.train.value_lr, cfg_.train.clip_norm)),
      train_rng_(derive_seed(seed, "train")),
      collect_rng_(derive_seed(seed, "collect")) {
  cfg_.validate();
  if (cfg_.train.seq_len > envs::kEpisodeLength + 1) throw ConfigError("seq_len exceeds the episode length");
  wall_start_ = now_seconds();
}

Trainer::Trainer(RunConfig cfg, std::uint64_t seed, std::filesystem::path run_dir, std::optional<ParamStore> start)
    : Trainer(std::move(cfg), seed, std::move(run_dir), 0) {
  start_fresh(std::move(start));
}

void Trainer::start_fresh(std::optional<ParamStore> start) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create run directory " + dir_.string() + ": " + ec.message());
  params_ = start ? std::move(*start) : initial_params(cfg_, dims_, seed_);
  slow_value_ = params_.section("value/");
  for (std::size_t i = 0; i < cfg_.initial_episodes; ++i)
    for (auto& ep : collect_episodes(dims_, params_, envs_, CollectMode::random, collect_rng_, 0.0))
      data_.add(std::move(ep));
  metrics_ = std::make_unique<MetricsWriter>(dir_ / kMetricsFile, true);
  save_state();
  if (cfg_.budget == 0) {
    finished_ = true;
    write_final();
  }
}

Trainer Trainer::resume(const std::filesystem::path& run_dir) {
  const Checkpoint ck = load_checkpoint(run_dir / kCheckpointFile);
  const auto& m = ck.meta;
  RunConfig cfg = config_from_json(m.at("config"));
  Trainer t(std::move(cfg), ck.seed, run_dir, 0);
  try {
    if (dims_from_json(m.at("dims")) != t.dims_) throw ConfigError("checkpoint dims do not match its config");
    t.params_ = ck.params;
    t.data_ = load_replay(run_dir / kReplayFile);
    t.env_steps_ = m.at("env_steps").get<long>();
    t.next_eval_ = m.at("next_eval").get<long>();
    t.last_eval_ = m.at("last_eval").get<long>();
    t.finished_ = m.at("finished").get<bool>();
    t.updates_ = m.at("updates").get<long>();
    t.slow_value_ = params_from_json(m.at("slow_value"));
    t.wm_opt_.restore(m.at("adam").at("wm"));
    t.actor_opt_.restore(m.at("adam").at("actor"));
    t.value_opt_.restore(m.at("adam").at("value"));
    restore_rng_state(t.train_rng_, m.at("rng").at("train").get<std::string>());
    restore_rng_state(t.collect_rng_, m.at("rng").at("collect").get<std::string>());
    t.wall_start_ -= m.value("wall_time", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run checkpoint: ") + e.what());
  }
  // Drop records written after the checkpoint, then keep appending.
  const auto metrics_path = run_dir / kMetricsFile;
  std::vector<MetricsRecord> kept;
  if (std::filesystem::exists(metrics_path))
    for (auto& r : read_metrics(metrics_path))
      if (r.env_step <= t.last_eval_) kept.push_back(std::move(r));
  t.metrics_ = std::make_unique<MetricsWriter>(metrics_path, true);
  for (const auto& r : kept) t.metrics_->append(r);
  return t;
}

TrainStepStats Trainer::train_step() {
  const auto& tc = cfg_.train;
  TrainStepStats stats;
  const SequenceBatch batch = data_.sample(tc.batch, tc.seq_len, train_rng_);

  std::vector<LatentState> post;
  ad::Tensor start_h, start_z;
  {
    ad::Tape tape;
    WorldModelLossWeights w;
    w.kl = tc.kl_weight;
    ad::Var loss = wm_.loss(tape, params_, batch, {&train_rng_}, w, nullptr, &post);
    stats.wm_loss = loss.value().item();
    const std::size_t rows = post.size() * tc.batch;
    std::vector<std::size_t> pick(rows);
    for (std::size_t i = 0; i < rows; ++i) pick[i] = i;
    if (tc.imagine_starts > 0 && tc.imagine_starts < rows) {
      std::shuffle(pick.begin(), pick.end(), train_rng_);
      pick.resize(tc.imagine_starts);
      std::sort(pick.begin(), pick.end());
    }
    start_h = ad::Tensor({pick.size(), dims_.deter});
    start_z = ad::Tensor({pick.size(), dims_.stoch});
    for (std::size_t r = 0; r < pick.size(); ++r) {
      const auto& s = post[pick[r] / tc.batch];
      const std::size_t row = pick[r] % tc.batch;
      for (std::size_t j = 0; j < dims_.deter; ++j) start_h.at(r, j) = s.h.value().at(row, j);
      for (std::size_t j = 0; j < dims_.stoch; ++j) start_z.at(r, j) = s.z.value().at(row, j);
    }
    auto grads = drop_frozen(behavior::filter_gradients(tape.backward(loss), "wm/"), cfg_.freeze);
    params_ = wm_opt_.step(params_, grads);
  }

  const behavior::ReturnConfig rc{tc.lambda, tc.gamma};
  const auto ac = dims_.actor_critic();
  ad::Tape tape;
  LatentState start;
  start.h = tape.constant(start_h);
  start.z = tape.constant(start_z);
  // Imagination and return targets read the slow critic when one is kept.
  ParamStore view = params_;
  if (tc.target_every > 0) view.merge(slow_value_);
  const auto traj = behavior::imagine_trajectory(tape, wm_, view, ac, start, tc.horizon, {&train_rng_});
  const auto targets = behavior::value_targets(traj, rc);
  stats.actor_objective = 0.0;
  for (double v : targets.targets.values()) stats.actor_objective += v;
  stats.actor_objective /= static_cast<double>(targets.targets.rows());
  params_ = actor_opt_.step(params_, drop_frozen(behavior::actor_gradients(tape, traj, rc), cfg_.freeze));
  {
    ad::Tape vt;
    stats.value_loss = behavior::value_loss(vt, params_, ac, targets).value().item();
  }
  params_ = value_opt_.step(params_, drop_frozen(behavior::value_gradients(params_, ac, targets), cfg_.freeze));
  ++updates_;
  if (tc.target_every > 0 && updates_ % tc.target_every == 0) slow_value_ = params_.section("value/");
  return stats;
}

void Trainer::evaluate_and_log() {
  for (auto& env : envs_) {
    Rng rng(derive_seed(derive_seed(seed_, "eval"), env->spec().task_id + "@" + std::to_string(env_steps_)));
    const EvalResult r = evaluate(dims_, params_, *env, cfg_.eval_episodes, rng);
    MetricsRecord rec;
    rec.run_id = cfg_.run_id;
    rec.seed = seed_;
    rec.task = env->spec().task_id;
    rec.env_step = env_steps_;
    rec.episode_return = r.mean_return;
    rec.episode_returns = r.returns;
    rec.wall_time = cfg_.log_wall_time ? now_seconds() - wall_start_ : 0.0;
    metrics_->append(rec);
  }
  last_eval_ = env_steps_;
  const long interval = cfg_.effective_eval_interval();
  while (next_eval_ <= env_steps_) next_eval_ += interval;
}

void Trainer::run(long stop_after) {
  if (finished_) return;
  const auto& tc = cfg_.train;
  if (last_eval_ < 0) {
    evaluate_and_log();
    save_state();
    if (stop_after >= 0 && env_steps_ >= stop_after) return;
  }
  while (env_steps_ < cfg_.budget) {
    for (std::size_t i = 0; i < tc.updates_per_collect; ++i) {
      const auto stats = train_step();
      if (!std::isfinite(stats.wm_loss) || !std::isfinite(stats.value_loss))
        throw NumericError("training diverged at env step " + std::to_string(env_steps_));
    }
    for (auto& ep : collect_episodes(dims_, params_, envs_, CollectMode::explore, collect_rng_, tc.explore_noise)) {
      env_steps_ += static_cast<long>(ep.length());
      data_.add(std::move(ep));
    }
    if (env_steps_ >= next_eval_ || env_steps_ >= cfg_.budget) {
      evaluate_and_log();
      save_state();
      if (stop_after >= 0 && env_steps_ >= stop_after && env_steps_ < cfg_.budget) return;
    }
  }
  finished_ = true;
  save_state();
  write_final();
}

Checkpoint Trainer::snapshot() const {
  Checkpoint ck;
  ck.seed = seed_;
  ck.params = params_;
  ck.meta = {{"kind", "agent"},
             {"config", config_to_json(cfg_)},
             {"dims", dims_to_json(dims_)},
             {"tasks", cfg_.tasks}};
  return ck;
}

void Trainer::save_state() const {
  Checkpoint ck = snapshot();
  ck.meta["env_steps"] = env_steps_;
  ck.meta["next_eval"] = next_eval_;
  ck.meta["last_eval"] = last_eval_;
  ck.meta["finished"] = finished_;
  ck.meta["updates"] = updates_;
  ck.meta["slow_value"] = params_to_json(slow_value_);
  ck.meta["adam"] = {{"wm", wm_opt_.state()}, {"actor", actor_opt_.state()}, {"value", value_opt_.state()}};
  ck.meta["rng"] = {{"train", rng_state(train_rng_)}, {"collect", rng_state(collect_rng_)}};
  ck.meta["wall_time"] = cfg_.log_wall_time ? now_seconds() - wall_start_ : 0.0;
  save_replay(dir_ / kReplayFile, data_);
  save_checkpoint(dir_ / kCheckpointFile, ck);
}

void Trainer::write_final() const {
  Checkpoint ck = snapshot();
  ck.meta["env_steps"] = env_steps_;
  save_checkpoint(dir_ / kFinalFile, ck);
}

}  // namespace mbtl
