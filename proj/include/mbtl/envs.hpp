#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mbtl/mdp.hpp"
#include "mbtl/rng.hpp"

namespace mbtl::envs {

inline constexpr std::size_t kEpisodeLength = 100;

struct EnvSpec {
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  std::size_t episode_length = kEpisodeLength;
  std::string task_id;
};

struct StepResult {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;
};

/// observations has length T + 1, actions and rewards length T.
struct Episode {
  std::string task_id;
  std::vector<std::vector<double>> observations;
  std::vector<std::vector<double>> actions;
  std::vector<double> rewards;

  std::size_t length() const { return rewards.size(); }
  double total_reward() const;
  bool operator==(const Episode&) const = default;
};

/// Fixed-length episodic environment. Actions are clipped to the spec bounds;
/// stepping after the episode ends throws std::logic_error.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  std::vector<double> reset(Rng& rng);
  StepResult step(std::span<const double> action);
  /// Bounds-clipped copy; throws on a wrong length or non-finite entry.
  std::vector<double> clip_action(std::span<const double> action) const;
  bool done() const { return t_ >= spec().episode_length; }
  std::size_t elapsed() const { return t_; }

 protected:
  virtual std::vector<double> do_reset(Rng& rng) = 0;
  /// Receives an in-bounds action of exactly spec().action_dim entries.
  virtual std::pair<std::vector<double>, double> do_step(std::span<const double> action) = 0;

 private:
  std::size_t t_ = 0;
  bool started_ = false;
};

/// One-hot observation of a tabular gridworld. The move is the argmax of the
/// action vector (lowest index on ties).
class GridworldEnv final : public Env {
 public:
  explicit GridworldEnv(std::size_t side = 5, std::string task_id = "gridworld");
  const EnvSpec& spec() const override { return spec_; }
  const mdp::TabularMdp& mdp() const { return mdp_; }
  std::size_t state() const { return state_; }

 protected:
  std::vector<double> do_reset(Rng& rng) override;
  std::pair<std::vector<double>, double> do_step(std::span<const double> action) override;

 private:
  std::vector<double> observe() const;

  mdp::TabularMdp mdp_;
  EnvSpec spec_;
  std::size_t state_ = 0;
  Rng rng_;
};

struct PointMassParams {
  std::size_t dim = 2;
  std::vector<double> target{0.5, 0.5};
  double drag = 0.4;
  double alive_bonus = 0.1;
  double dt = 0.1;
};

/// Force-controlled point mass reaching a target. Observation [p, v].
/// Reward = alive_bonus + progress, where progress is the change of the
/// potential −‖p − target‖/dt.
class PointMassEnv final : public Env {
 public:
  PointMassEnv(PointMassParams params, std::string task_id);
  const EnvSpec& spec() const override { return spec_; }
  const PointMassParams& params() const { return params_; }
  double potential() const;
  void set_state(std::vector<double> position, std::vector<double> velocity);

 protected:
  std::vector<double> do_reset(Rng& rng) override;
  std::pair<std::vector<double>, double> do_step(std::span<const double> action) override;

 private:
  std::vector<double> observe() const;

  PointMassParams params_;
  EnvSpec spec_;
  std::vector<double> pos_, vel_;
};

/// Torque-driven swing-up of n coupled poles, angles measured from upright.
/// Reward Σ_i cos θ_i. Observation [cos θ_i, sin θ_i, ω_i] per pole.
class PendulumEnv final : public Env {
 public:
  PendulumEnv(std::size_t poles, std::string task_id);
  const EnvSpec& spec() const override { return spec_; }
  void set_state(std::vector<double> angles, std::vector<double> velocities);
  double upright_reward() const;

 protected:
  std::vector<double> do_reset(Rng& rng) override;
  std::pair<std::vector<double>, double> do_step(std::span<const double> action) override;

 private:
  std::vector<double> observe() const;

  EnvSpec spec_;
  std::vector<double> theta_, omega_;
};

/// Same dynamics with the reward negated.
class MirrorEnv final : public Env {
 public:
  MirrorEnv(std::unique_ptr<Env> inner, std::string task_id);
  const EnvSpec& spec() const override { return spec_; }

 protected:
  std::vector<double> do_reset(Rng& rng) override;
  std::pair<std::vector<double>, double> do_step(std::span<const double> action) override;

 private:
  std::unique_ptr<Env> inner_;
  EnvSpec spec_;
};

/// Widens the action space to target_dim. Trailing entries are ignored.
class PaddedEnv final : public Env {
 public:
  PaddedEnv(std::unique_ptr<Env> inner, std::size_t target_dim);
  const EnvSpec& spec() const override { return spec_; }
  const Env& inner() const { return *inner_; }

 protected:
  std::vector<double> do_reset(Rng& rng) override;
  std::pair<std::vector<double>, double> do_step(std::span<const double> action) override;

 private:
  std::unique_ptr<Env> inner_;
  EnvSpec spec_;
};

std::unique_ptr<Env> pad_action_space(std::unique_ptr<Env> env, std::size_t target_dim);

std::size_t max_action_dim(std::span<const EnvSpec> specs);

/// Known task names: gridworld, pointmass_a, pointmass_a_prime,
/// pointmass_a_dprime, pointmass3_a, pendulum, double_pendulum, plus
/// "mirror_<name>" for any of them.
std::vector<std::string> task_names();
std::unique_ptr<Env> make_env(const std::string& task);

/// Rolls out one full episode. policy maps an observation to an action.
template <typename Policy>
Episode run_episode(Env& env, Rng& rng, Policy&& policy) {
  Episode ep;
  ep.task_id = env.spec().task_id;
  ep.observations.push_back(env.reset(rng));
  while (!env.done()) {
    std::vector<double> a = env.clip_action(policy(ep.observations.back()));
    StepResult r = env.step(a);
    ep.actions.push_back(std::move(a));
    ep.rewards.push_back(r.reward);
    ep.observations.push_back(std::move(r.obs));
  }
  return ep;
}

}  // namespace mbtl::envs
