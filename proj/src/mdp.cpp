#include "mbtl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mbtl/errors.hpp"

namespace mbtl::mdp {

namespace {

constexpr std::size_t kMaxSweeps = 10'000'000;
constexpr std::size_t kMaxPolicyRounds = 100'000;

double l1_change(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

void require_tol(double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
}

}  // namespace

void TabularMdp::validate() const {
  if (n_states == 0 || n_actions == 0) throw std::invalid_argument("TabularMdp: empty state or action set");
  const std::size_t n = n_states * n_actions * n_states;
  if (transition.size() != n || reward.size() != n) {
    throw std::invalid_argument("TabularMdp: tensors must hold n_states*n_actions*n_states entries");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMdp: gamma must lie in [0, 1)");
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (std::size_t next = 0; next < n_states; ++next) {
        const double pr = p(s, a, next);
        if (!(pr >= 0.0 && pr <= 1.0)) throw std::invalid_argument("TabularMdp: probability outside [0, 1]");
        if (!std::isfinite(r(s, a, next))) throw std::invalid_argument("TabularMdp: non-finite reward");
        total += pr;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("TabularMdp: P[" + std::to_string(s) + "][" + std::to_string(a) +
                                    "] does not sum to 1");
      }
    }
  }
}

std::size_t argmax(std::span<const double> xs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[best]) best = i;
  return best;
}

double action_value(const TabularMdp& mdp, const ValueFunction& v, std::size_t s, std::size_t a) {
  double q = 0.0;
  for (std::size_t next = 0; next < mdp.n_states; ++next) {
    q += mdp.p(s, a, next) * (mdp.r(s, a, next) + mdp.gamma * v.values[next]);
  }
  return q;
}

QTable q_from_values(const TabularMdp& mdp, const ValueFunction& v) {
  QTable q(mdp.n_states, mdp.n_actions);
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) q.at(s, a) = action_value(mdp, v, s, a);
  return q;
}

TabularPolicy greedy_policy(const TabularMdp& mdp, const ValueFunction& v) {
  const QTable q = q_from_values(mdp, v);
  TabularPolicy pi;
  pi.action.resize(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) pi.action[s] = argmax(q.row(s));
  return pi;
}

double bellman_residual(const TabularMdp& mdp, const ValueFunction& v) {
  const QTable q = q_from_values(mdp, v);
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto row = q.row(s);
    worst = std::max(worst, std::abs(v.values[s] - *std::max_element(row.begin(), row.end())));
  }
  return worst;
}

Solution value_iteration(const TabularMdp& mdp, double tol, std::optional<ValueFunction> init) {
  mdp.validate();
  require_tol(tol);
  std::vector<double> v = init ? init->values : std::vector<double>(mdp.n_states, 0.0);
  if (v.size() != mdp.n_states) throw std::invalid_argument("value_iteration: initial values have wrong length");

  std::vector<double> next(mdp.n_states);
  std::vector<double> q(mdp.n_actions);
  Solution sol;
  for (;;) {
    const ValueFunction cur{v};
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      for (std::size_t a = 0; a < mdp.n_actions; ++a) q[a] = action_value(mdp, cur, s, a);
      next[s] = *std::max_element(q.begin(), q.end());
    }
    ++sol.sweeps;
    const double delta = l1_change(v, next);
    v.swap(next);
    if (delta < tol) break;
    if (sol.sweeps >= kMaxSweeps) throw NumericError("value_iteration: no convergence");
  }
  sol.value.values = std::move(v);
  sol.policy = greedy_policy(mdp, sol.value);
  return sol;
}

ValueFunction evaluate_policy(const TabularMdp& mdp, const TabularPolicy& policy, double tol,
                              std::optional<ValueFunction> init) {
  mdp.validate();
  require_tol(tol);
  if (policy.action.size() != mdp.n_states) throw std::invalid_argument("evaluate_policy: policy has wrong length");
  for (std::size_t a : policy.action)
    if (a >= mdp.n_actions) throw std::invalid_argument("evaluate_policy: action index out of range");

  std::vector<double> v = init ? init->values : std::vector<double>(mdp.n_states, 0.0);
  std::vector<double> next(mdp.n_states);
  for (std::size_t sweep = 0;; ++sweep) {
    const ValueFunction cur{v};
    for (std::size_t s = 0; s < mdp.n_states; ++s) next[s] = action_value(mdp, cur, s, policy.action[s]);
    const double delta = l1_change(v, next);
    v.swap(next);
    if (delta < tol) break;
    if (sweep >= kMaxSweeps) throw NumericError("evaluate_policy: no convergence");
  }
  return ValueFunction{std::move(v)};
}

Solution policy_iteration(const TabularMdp& mdp, double tol) {
  mdp.validate();
  require_tol(tol);
  Solution sol;
  sol.policy.action.assign(mdp.n_states, 0);
  sol.value.values.assign(mdp.n_states, 0.0);
  for (;;) {
    sol.value = evaluate_policy(mdp, sol.policy, tol, sol.value);
    TabularPolicy improved = greedy_policy(mdp, sol.value);
    ++sol.sweeps;
    if (improved == sol.policy) break;
    sol.policy = std::move(improved);
    if (sol.sweeps >= kMaxPolicyRounds) throw NumericError("policy_iteration: policy did not stabilize");
  }
  return sol;
}

QTable q_learning_update(const QTable& q, std::size_t s, std::size_t a, double r, std::size_t s_next, double alpha,
                         double gamma) {
  if (s >= q.n_states || s_next >= q.n_states || a >= q.n_actions) {
    throw std::invalid_argument("q_learning_update: index out of range");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("q_learning_update: alpha must lie in [0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("q_learning_update: gamma must lie in [0, 1)");
  QTable out = q;
  const auto next_row = q.row(s_next);
  const double best_next = *std::max_element(next_row.begin(), next_row.end());
  out.at(s, a) = q.at(s, a) + alpha * (r + gamma * best_next - q.at(s, a));
  return out;
}

std::size_t epsilon_greedy(const QTable& q, std::size_t s, double epsilon, Rng& rng) {
  if (s >= q.n_states) throw std::invalid_argument("epsilon_greedy: state out of range");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon_greedy: epsilon must lie in [0, 1]");
  if (epsilon > 0.0 && uniform(rng, 0.0, 1.0) < epsilon) return uniform_index(rng, q.n_actions);
  return argmax(q.row(s));
}

QTable q_learning(const TabularMdp& mdp, const QLearningConfig& config, Rng& rng) {
  mdp.validate();
  if (config.updates < 0 || config.restart_every <= 0) throw std::invalid_argument("q_learning: bad schedule");
  QTable q(mdp.n_states, mdp.n_actions);
  std::vector<long> visits(mdp.n_states * mdp.n_actions, 0);
  std::size_t s = 0;
  for (long k = 0; k < config.updates; ++k) {
    if (k % config.restart_every == 0) s = uniform_index(rng, mdp.n_states);
    const std::size_t a = epsilon_greedy(q, s, config.epsilon, rng);
    const auto [next, r] = sample_transition(mdp, s, a, rng);
    const double alpha = std::pow(1.0 + static_cast<double>(visits[s * mdp.n_actions + a]++), -config.step_exponent);
    q = q_learning_update(q, s, a, r, next, alpha, mdp.gamma);
    s = next;
  }
  return q;
}

double linear_schedule(double start, double end, long duration, long step) {
  if (duration <= 0 || step >= duration) return end;
  if (step <= 0) return start;
  const double frac = static_cast<double>(step) / static_cast<double>(duration);
  return start + (end - start) * frac;
}

std::pair<std::size_t, double> sample_transition(const TabularMdp& mdp, std::size_t s, std::size_t a, Rng& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  std::size_t next = mdp.n_states - 1;
  for (std::size_t k = 0; k < mdp.n_states; ++k) {
    acc += mdp.p(s, a, k);
    if (u < acc) {
      next = k;
      break;
    }
  }
  return {next, mdp.r(s, a, next)};
}

TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng) {
  TabularMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.transition.resize(n_states * n_actions * n_states);
  m.reward.resize(m.transition.size());
  std::exponential_distribution<double> expo(1.0);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (std::size_t k = 0; k < n_states; ++k) total += m.transition[m.index(s, a, k)] = expo(rng);
      for (std::size_t k = 0; k < n_states; ++k) {
        m.transition[m.index(s, a, k)] /= total;
        m.reward[m.index(s, a, k)] = uniform(rng, -1.0, 1.0);
      }
      // renormalize so the row sum is exactly representable as 1 within 1e-12
      double check = 0.0;
      for (std::size_t k = 0; k + 1 < n_states; ++k) check += m.transition[m.index(s, a, k)];
      m.transition[m.index(s, a, n_states - 1)] = std::max(0.0, 1.0 - check);
    }
  }
  return m;
}

TabularMdp gridworld_mdp(std::size_t side, double gamma) {
  TabularMdp m;
  m.n_states = side * side;
  m.n_actions = 4;
  m.gamma = gamma;
  m.transition.assign(m.n_states * m.n_actions * m.n_states, 0.0);
  m.reward.assign(m.transition.size(), 0.0);
  const std::size_t goal = m.n_states - 1;
  for (std::size_t s = 0; s < m.n_states; ++s) {
    const long row = static_cast<long>(s / side), col = static_cast<long>(s % side);
    for (std::size_t a = 0; a < 4; ++a) {
      std::size_t next = s;
      if (s != goal) {
        static constexpr long dr[4] = {-1, 1, 0, 0};
        static constexpr long dc[4] = {0, 0, -1, 1};
        const long nr = std::clamp(row + dr[a], 0L, static_cast<long>(side) - 1);
        const long nc = std::clamp(col + dc[a], 0L, static_cast<long>(side) - 1);
        next = static_cast<std::size_t>(nr) * side + static_cast<std::size_t>(nc);
      }
      m.transition[m.index(s, a, next)] = 1.0;
      if (s != goal && next == goal) m.reward[m.index(s, a, next)] = 1.0;
    }
  }
  return m;
}

TabularMdp mdp_from_json(const nlohmann::json& doc) {
  TabularMdp m;
  try {
    m.n_states = doc.at("n_states").get<std::size_t>();
    m.n_actions = doc.at("n_actions").get<std::size_t>();
    m.gamma = doc.at("gamma").get<double>();
    m.transition = doc.at("transition").get<std::vector<double>>();
    m.reward = doc.at("reward").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("MDP document: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
  return {{"n_states", mdp.n_states},
          {"n_actions", mdp.n_actions},
          {"gamma", mdp.gamma},
          {"transition", mdp.transition},
          {"reward", mdp.reward}};
}

}  // namespace mbtl::mdp
