#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "mbtl/rng.hpp"

namespace mbtl::mdp {

inline constexpr double kDefaultTol = 1e-8;

/// Finite MDP with dense P[s][a][s'] and R[s][a][s'] tensors, flattened
/// row-major.
struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  double gamma = 0.9;

  std::size_t index(std::size_t s, std::size_t a, std::size_t next) const {
    return (s * n_actions + a) * n_states + next;
  }
  double p(std::size_t s, std::size_t a, std::size_t next) const { return transition[index(s, a, next)]; }
  double r(std::size_t s, std::size_t a, std::size_t next) const { return reward[index(s, a, next)]; }

  /// Throws std::invalid_argument unless sizes agree, every row of P is a
  /// distribution (sum within 1e-12) and 0 <= gamma < 1.
  void validate() const;
};

struct ValueFunction {
  std::vector<double> values;
};

struct QTable {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> values;

  QTable() = default;
  QTable(std::size_t states, std::size_t actions, double fill = 0.0)
      : n_states(states), n_actions(actions), values(states * actions, fill) {}

  double at(std::size_t s, std::size_t a) const { return values[s * n_actions + a]; }
  double& at(std::size_t s, std::size_t a) { return values[s * n_actions + a]; }
  std::span<const double> row(std::size_t s) const { return {values.data() + s * n_actions, n_actions}; }
};

struct TabularPolicy {
  std::vector<std::size_t> action;

  bool operator==(const TabularPolicy&) const = default;
};

struct Solution {
  ValueFunction value;
  TabularPolicy policy;
  std::size_t sweeps = 0;
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> xs);

/// Σ_s' P(s,a,s') [R(s,a,s') + γ V(s')]
double action_value(const TabularMdp& mdp, const ValueFunction& v, std::size_t s, std::size_t a);
QTable q_from_values(const TabularMdp& mdp, const ValueFunction& v);
TabularPolicy greedy_policy(const TabularMdp& mdp, const ValueFunction& v);
/// max_s |V(s) − max_a Q(s,a)|
double bellman_residual(const TabularMdp& mdp, const ValueFunction& v);

/// Sweeps until the summed absolute change between consecutive value
/// functions drops below tol, then extracts the greedy policy from the final
/// values. `init` defaults to zeros.
Solution value_iteration(const TabularMdp& mdp, double tol = kDefaultTol,
                         std::optional<ValueFunction> init = std::nullopt);

/// Iterative policy evaluation under a fixed policy.
ValueFunction evaluate_policy(const TabularMdp& mdp, const TabularPolicy& policy, double tol = kDefaultTol,
                              std::optional<ValueFunction> init = std::nullopt);

/// Alternates evaluation and greedy improvement until the policy is stable.
Solution policy_iteration(const TabularMdp& mdp, double tol = kDefaultTol);

/// Q(s,a) ← Q(s,a) + α (r + γ max_a' Q(s',a') − Q(s,a)); all other entries are
/// copied unchanged.
QTable q_learning_update(const QTable& q, std::size_t s, std::size_t a, double r, std::size_t s_next, double alpha,
                         double gamma);

/// Uniform random action with probability ε, else the lowest-index argmax.
std::size_t epsilon_greedy(const QTable& q, std::size_t s, double epsilon, Rng& rng);

struct QLearningConfig {
  long updates = 50'000;
  double epsilon = 0.3;
  // α = (1 + visits(s,a))^-step_exponent; any exponent in (0.5, 1] satisfies
  // the stochastic-approximation conditions.
  double step_exponent = 0.6;
  // The walker restarts from a uniformly drawn state this often.
  long restart_every = 20;
};

/// Runs ε-greedy tabular Q-learning against sampled transitions of `mdp`.
QTable q_learning(const TabularMdp& mdp, const QLearningConfig& config, Rng& rng);

/// Linear interpolation from `start` to `end` over `duration` steps, then
/// constant at `end`.
double linear_schedule(double start, double end, long duration, long step);

/// Samples s' ~ P(s,a,·) and returns (s', R(s,a,s')).
std::pair<std::size_t, double> sample_transition(const TabularMdp& mdp, std::size_t s, std::size_t a, Rng& rng);

/// Dirichlet(1)-style random transition rows and rewards uniform in [-1, 1].
TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng);

/// Deterministic side×side grid, actions {up, down, left, right}. Entering the
/// bottom-right goal pays 1; the goal is absorbing with zero reward.
TabularMdp gridworld_mdp(std::size_t side = 5, double gamma = 0.9);

/// Document layout: {"n_states", "n_actions", "gamma", "transition": [...],
/// "reward": [...]} with tensors flattened row-major over (s, a, s').
TabularMdp mdp_from_json(const nlohmann::json& doc);
nlohmann::json mdp_to_json(const TabularMdp& mdp);

}  // namespace mbtl::mdp
