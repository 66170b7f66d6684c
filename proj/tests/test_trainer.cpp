#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mbtl/checkpoint.hpp"
#include "mbtl/errors.hpp"
#include "mbtl/trainer.hpp"

using namespace mbtl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mbtl_trainer_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny_config(std::vector<std::string> tasks = {"pointmass_a"}, long budget = 400) {
  RunConfig c;
  c.run_id = "tiny";
  c.tasks = std::move(tasks);
  c.budget = budget;
  c.eval_interval = 200;
  c.model = {.deter = 4, .stoch = 2, .hidden = 8, .embed = 8, .ac_hidden = 8};
  c.train.updates_per_collect = 3;
  c.train.batch = 4;
  c.train.seq_len = 5;
  c.train.horizon = 4;
  c.train.imagine_starts = 8;
  c.train.target_every = 2;
  return c;
}

// s' = s + a from a fixed start, reward −s'².
class FixedLine final : public envs::Env {
 public:
  FixedLine() {
    spec_.obs_dim = 1;
    spec_.action_dim = 1;
    spec_.action_low = {-1.0};
    spec_.action_high = {1.0};
    spec_.episode_length = 20;
    spec_.task_id = "line";
  }
  const envs::EnvSpec& spec() const override { return spec_; }

 protected:
  std::vector<double> do_reset(Rng&) override {
    s_ = 0.7;
    return {s_};
  }
  std::pair<std::vector<double>, double> do_step(std::span<const double> a) override {
    s_ += a[0];
    return {{s_}, -s_ * s_};
  }

 private:
  envs::EnvSpec spec_;
  double s_ = 0.0;
};

AgentDims line_dims() { return {.obs_dim = 1, .action_dim = 1, .deter = 3, .stoch = 2, .hidden = 6, .embed = 4, .ac_hidden = 5}; }

}  // namespace

TEST(TaskEnvs, PadsToWidestActionSpace) {
  const EnvList envs = make_task_envs({"double_pendulum", "pointmass3_a"});
  ASSERT_EQ(envs.size(), 2u);
  for (const auto& e : envs) {
    EXPECT_EQ(e->spec().obs_dim, 6u);
    EXPECT_EQ(e->spec().action_dim, 3u);
  }
  EXPECT_EQ(envs[0]->spec().task_id, "double_pendulum");
  const RunConfig c = tiny_config({"double_pendulum", "pointmass3_a"});
  const AgentDims d = agent_dims_for(c, envs);
  EXPECT_EQ(d.obs_dim, 6u);
  EXPECT_EQ(d.action_dim, 3u);
  EXPECT_EQ(d.deter, 4u);
}

TEST(TaskEnvs, RejectsIncompatibleOrUnknownTasks) {
  EXPECT_THROW(make_task_envs({"pointmass_a", "pendulum"}), ConfigError);
  EXPECT_THROW(make_task_envs({"no_such_task"}), ConfigError);
  EXPECT_THROW(make_task_envs({}), ConfigError);
}

TEST(TaskEnvs, UnpaddedSetIsAMismatch) {
  EnvList envs;
  envs.push_back(envs::make_env("double_pendulum"));
  envs.push_back(envs::make_env("pointmass3_a"));
  EXPECT_THROW(agent_dims_for(tiny_config(), envs), ConfigError);
}

TEST(Collect, OneEpisodePerTaskInOrder) {
  EnvList envs = make_task_envs({"pointmass_a", "pointmass_a_prime", "pointmass_a_dprime"});
  RunConfig c = tiny_config();
  const AgentDims d = agent_dims_for(c, envs);
  Rng rng(1);
  const ParamStore p = init_agent(d, rng);
  for (auto mode : {CollectMode::random, CollectMode::explore}) {
    const auto eps = collect_episodes(d, p, envs, mode, rng, 0.3);
    ASSERT_EQ(eps.size(), 3u);
    EXPECT_EQ(eps[0].task_id, "pointmass_a");
    EXPECT_EQ(eps[1].task_id, "pointmass_a_prime");
    EXPECT_EQ(eps[2].task_id, "pointmass_a_dprime");
    for (const auto& e : eps) {
      EXPECT_EQ(e.length(), envs::kEpisodeLength);
      for (const auto& a : e.actions)
        for (double x : a) EXPECT_LE(std::abs(x), 1.0);
    }
  }
  EnvList one = make_task_envs({"pendulum"});
  RunConfig cp = tiny_config({"pendulum"});
  const AgentDims dp = agent_dims_for(cp, one);
  EXPECT_EQ(collect_episodes(dp, init_agent(dp, rng), one, CollectMode::explore, rng, 0.3).size(), 1u);
}

TEST(Collect, ExplorationNoiseChangesActions) {
  EnvList envs = make_task_envs({"pointmass_a"});
  const AgentDims d = agent_dims_for(tiny_config(), envs);
  Rng init(2);
  const ParamStore p = init_agent(d, init);
  Rng a(3), b(3);
  const auto quiet = collect_episodes(d, p, envs, CollectMode::explore, a, 0.0);
  const auto noisy = collect_episodes(d, p, envs, CollectMode::explore, b, 0.3);
  EXPECT_NE(quiet[0].actions, noisy[0].actions);
}

TEST(Evaluate, DeterministicEnvGivesIdenticalReturns) {
  FixedLine env;
  Rng init(4);
  const ParamStore p = init_agent(line_dims(), init);
  Rng rng(5);
  const EvalResult r = evaluate(line_dims(), p, env, 4, rng);
  ASSERT_EQ(r.returns.size(), 4u);
  for (double x : r.returns) EXPECT_EQ(x, r.returns[0]);
  EXPECT_EQ(r.mean_return, r.returns[0]);
  Rng rng1(6);
  const EvalResult one = evaluate(line_dims(), p, env, 1, rng1);
  EXPECT_EQ(one.mean_return, one.returns.at(0));
  EXPECT_EQ(one.mean_return, r.returns[0]);
  EXPECT_THROW(evaluate(line_dims(), p, env, 0, rng1), std::invalid_argument);
}

TEST(Evaluate, ReturnsMatchResimulationOfLoggedActions) {
  for (const std::string task : {"pointmass_a", "pendulum", "double_pendulum", "gridworld"}) {
    EnvList envs = make_task_envs({task});
    const AgentDims d = agent_dims_for(tiny_config({task}), envs);
    Rng init(7);
    const ParamStore p = init_agent(d, init);
    Rng rng(8);
    const EvalResult r = evaluate(d, p, *envs[0], 3, rng);
    // Replay the logged actions on a fresh env with the same reset stream.
    auto fresh = envs::make_env(task);
    Rng replay(8);
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& ep = r.episodes[i];
      EXPECT_EQ(fresh->reset(replay), ep.observations[0]);
      double ret = 0.0;
      for (std::size_t t = 0; t < ep.length(); ++t) {
        const auto step = fresh->step(ep.actions[t]);
        EXPECT_EQ(step.reward, ep.rewards[t]);
        ret += step.reward;
      }
      EXPECT_EQ(ret, r.returns[i]) << task;
      total += ret;
    }
    EXPECT_DOUBLE_EQ(total / 3.0, r.mean_return);
  }
}

TEST(Trainer, ZeroBudgetWritesOnlyInitialState) {
  const auto dir = temp_dir("zero");
  RunConfig c = tiny_config({"pointmass_a", "pointmass_a_prime"}, 0);
  Trainer t(c, 1, dir);
  t.run();
  EXPECT_TRUE(t.finished());
  EXPECT_EQ(t.env_steps(), 0);
  EXPECT_EQ(t.data().episodes("pointmass_a"), 1u);
  EXPECT_EQ(t.data().episodes("pointmass_a_prime"), 1u);
  EXPECT_TRUE(fs::exists(dir / "checkpoint.json"));
  EXPECT_TRUE(fs::exists(dir / "final.json"));
  EXPECT_TRUE(read_metrics(dir / "metrics.jsonl").empty());
  EXPECT_EQ(load_checkpoint(dir / "final.json").params, t.params());
  EXPECT_EQ(load_replay(dir / "replay.json"), t.data());
}

TEST(Trainer, InitialCollectionIsOneRandomEpisodePerTask) {
  const auto dir = temp_dir("initial");
  Trainer t(tiny_config({"pointmass_a"}, 0), 2, dir);
  EXPECT_EQ(t.data().total_episodes(), 1u);
  EXPECT_EQ(t.data().total_steps(), envs::kEpisodeLength);
}

TEST(Trainer, RunsBudgetAndLogsEveryEval) {
  const auto dir = temp_dir("budget");
  Trainer t(tiny_config({"pointmass_a"}, 400), 3, dir);
  t.run();
  EXPECT_TRUE(t.finished());
  EXPECT_EQ(t.env_steps(), 400);
  EXPECT_EQ(t.data().total_episodes(), 5u);
  const auto recs = read_metrics(dir / "metrics.jsonl");
  std::vector<long> steps;
  for (const auto& r : recs) {
    steps.push_back(r.env_step);
    EXPECT_EQ(r.run_id, "tiny");
    EXPECT_EQ(r.seed, 3u);
    EXPECT_EQ(r.task, "pointmass_a");
    EXPECT_EQ(r.wall_time, 0.0);
    EXPECT_EQ(r.episode_returns.size(), 1u);
    EXPECT_TRUE(std::isfinite(r.episode_return));
  }
  EXPECT_EQ(steps, (std::vector<long>{0, 200, 400}));
  EXPECT_EQ(load_checkpoint(dir / "final.json").params, t.params());
}

TEST(Trainer, MultiTaskDatasetStaysBalanced) {
  const auto dir = temp_dir("balance");
  RunConfig c = tiny_config({"pointmass_a", "pointmass_a_prime", "pointmass_a_dprime"}, 900);
  c.eval_interval = 300;
  Trainer t(c, 4, dir);
  while (!t.finished()) {
    t.run(t.env_steps() + 1);
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& task : c.tasks) {
      lo = std::min(lo, t.data().episodes(task));
      hi = std::max(hi, t.data().episodes(task));
    }
    EXPECT_LE(hi - lo, 1u);
  }
  for (const auto& task : c.tasks) EXPECT_EQ(t.data().episodes(task), 4u);
  const auto recs = read_metrics(dir / "metrics.jsonl");
  EXPECT_EQ(recs.size(), 3u * 4u);  // evals at 0, 300, 600, 900
}

TEST(Trainer, SameSeedGivesByteIdenticalMetrics) {
  const auto a = temp_dir("det_a"), b = temp_dir("det_b"), c = temp_dir("det_c");
  Trainer(tiny_config(), 5, a).run();
  Trainer(tiny_config(), 5, b).run();
  Trainer(tiny_config(), 6, c).run();
  EXPECT_EQ(slurp(a / "metrics.jsonl"), slurp(b / "metrics.jsonl"));
  EXPECT_EQ(slurp(a / "final.json"), slurp(b / "final.json"));
  EXPECT_NE(slurp(a / "final.json"), slurp(c / "final.json"));
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  const auto full = temp_dir("resume_full"), part = temp_dir("resume_part");
  RunConfig c = tiny_config({"pointmass_a", "pointmass_a_prime"}, 800);
  Trainer(c, 7, full).run();
  {
    Trainer t(c, 7, part);
    t.run(400);
    EXPECT_FALSE(t.finished());
    EXPECT_EQ(t.env_steps(), 400);
  }
  // A crash after the checkpoint leaves stray records behind.
  { std::ofstream(part / "metrics.jsonl", std::ios::app) << record_to_json({"tiny", 7, "x", 999, 0, {}, 0}).dump() << '\n'; }
  Trainer resumed = Trainer::resume(part);
  EXPECT_EQ(resumed.env_steps(), 400);
  resumed.run();
  EXPECT_EQ(slurp(full / "metrics.jsonl"), slurp(part / "metrics.jsonl"));
  EXPECT_EQ(load_checkpoint(full / "final.json").params, load_checkpoint(part / "final.json").params);
}

TEST(Trainer, ResumeOfFinishedRunIsANoOp) {
  const auto dir = temp_dir("resume_done");
  Trainer(tiny_config(), 8, dir).run();
  const std::string before = slurp(dir / "metrics.jsonl");
  Trainer t = Trainer::resume(dir);
  EXPECT_TRUE(t.finished());
  t.run();
  EXPECT_EQ(slurp(dir / "metrics.jsonl"), before);
  EXPECT_THROW(Trainer::resume(temp_dir("missing")), IoError);
}

TEST(Trainer, FrozenPrefixesStayBitExact) {
  const auto dir = temp_dir("freeze");
  RunConfig c = tiny_config();
  c.freeze = {"wm/enc/", "value/"};
  Trainer t(c, 9, dir);
  const ParamStore before = t.params();
  t.run();
  for (const auto& name : before.names_with_prefix("wm/enc/")) EXPECT_EQ(t.params().value(name), before.value(name));
  for (const auto& name : before.names_with_prefix("value/")) EXPECT_EQ(t.params().value(name), before.value(name));
  bool moved = false;
  for (const auto& name : before.names_with_prefix("wm/core/")) moved |= t.params().value(name) != before.value(name);
  for (const auto& name : before.names_with_prefix("actor/")) moved |= t.params().value(name) != before.value(name);
  EXPECT_TRUE(moved);
}

TEST(Trainer, TrainStepOnlyTouchesAgentParameters) {
  const auto dir = temp_dir("step");
  Trainer t(tiny_config(), 10, dir);
  const ParamStore before = t.params();
  const auto stats = t.train_step();
  EXPECT_TRUE(std::isfinite(stats.wm_loss));
  EXPECT_TRUE(std::isfinite(stats.value_loss));
  EXPECT_EQ(t.params().size(), before.size());
  for (const auto& prefix : {"wm/", "actor/", "value/"}) {
    bool moved = false;
    for (const auto& name : before.names_with_prefix(prefix)) moved |= t.params().value(name) != before.value(name);
    EXPECT_TRUE(moved) << prefix;
  }
}

TEST(Trainer, TransferInitialisesFromSourceCheckpoint) {
  const auto src = temp_dir("src"), tgt = temp_dir("tgt"), frac = temp_dir("frac");
  Trainer(tiny_config({"pointmass_a"}, 200), 11, src).run();
  const Checkpoint source = load_checkpoint(src / "final.json");

  RunConfig c = tiny_config({"pointmass_a_dprime"}, 0);
  c.transfer.source = (src / "final.json").string();
  c.transfer.mode = "identity";
  Trainer t(c, 12, tgt);
  EXPECT_EQ(t.params(), source.params);

  c.transfer.mode = "default";
  c.transfer.omega = 0.0;
  Trainer f(c, 12, frac);
  Rng rng(derive_seed(12, "init"));
  const ParamStore fresh = init_agent(t.dims(), rng);
  const ParamStore expect = transfer::apply_transfer(source.params, fresh, transfer::default_dreamer_map(0.0));
  EXPECT_EQ(f.params(), expect);
}

TEST(Trainer, TransferFromIncompatibleSourceIsAConfigError) {
  const auto src = temp_dir("src3"), tgt = temp_dir("tgt3");
  Trainer(tiny_config({"pointmass3_a"}, 0), 1, src);
  RunConfig c = tiny_config({"pointmass_a"}, 0);
  c.transfer.source = (src / "final.json").string();
  c.transfer.mode = "full";
  EXPECT_THROW(Trainer(c, 1, tgt), ConfigError);
}

TEST(Trainer, DropFrozenFiltersByPrefix) {
  ad::Gradients g{{"wm/enc/l0/w", ad::Tensor({1})}, {"wm/core/x", ad::Tensor({1})}, {"actor/l0/b", ad::Tensor({1})}};
  const auto kept = drop_frozen(g, {"wm/enc/", "actor/"});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_TRUE(kept.contains("wm/core/x"));
  EXPECT_EQ(drop_frozen(g, {}).size(), 3u);
}
