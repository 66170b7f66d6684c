#pragma once

// Exhaustive deterministic-policy enumeration with an exact linear solve per
// policy. Test-only; independent of the iterative solvers it checks.

#include <Eigen/Dense>
#include <vector>

#include "mbtl/mdp.hpp"

namespace mbtl::oracle {

inline std::vector<double> exact_policy_values(const mdp::TabularMdp& m, const std::vector<std::size_t>& pi) {
  const auto n = static_cast<Eigen::Index>(m.n_states);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < m.n_states; ++s) {
    for (std::size_t k = 0; k < m.n_states; ++k) {
      const double p = m.p(s, pi[s], k);
      a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) -= m.gamma * p;
      b(static_cast<Eigen::Index>(s)) += p * m.r(s, pi[s], k);
    }
  }
  Eigen::VectorXd v = a.fullPivLu().solve(b);
  return {v.data(), v.data() + n};
}

struct EnumerationResult {
  std::vector<std::size_t> best_policy;
  std::vector<double> best_values;
  // Gap between the best and second-best policy's summed value; a positive gap
  // means the optimum is unique.
  double margin = 0.0;
};

inline EnumerationResult enumerate_policies(const mdp::TabularMdp& m) {
  std::size_t count = 1;
  for (std::size_t s = 0; s < m.n_states; ++s) count *= m.n_actions;
  EnumerationResult res;
  double best = -1e300, second = -1e300;
  std::vector<std::size_t> pi(m.n_states, 0);
  for (std::size_t code = 0; code < count; ++code) {
    std::size_t c = code;
    for (std::size_t s = 0; s < m.n_states; ++s) {
      pi[s] = c % m.n_actions;
      c /= m.n_actions;
    }
    const auto v = exact_policy_values(m, pi);
    double total = 0.0;
    for (double x : v) total += x;
    if (total > best) {
      second = best;
      best = total;
      res.best_policy = pi;
      res.best_values = v;
    } else if (total > second) {
      second = total;
    }
  }
  res.margin = count > 1 ? best - second : 1.0;
  return res;
}

/// Deterministic chain: action 1 moves right, action 0 moves left; taking
/// action 1 in the last state pays 1 and stays.
inline mdp::TabularMdp chain_mdp(std::size_t n, double gamma) {
  mdp::TabularMdp m;
  m.n_states = n;
  m.n_actions = 2;
  m.gamma = gamma;
  m.transition.assign(n * 2 * n, 0.0);
  m.reward.assign(n * 2 * n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t left = s == 0 ? 0 : s - 1;
    const std::size_t right = s + 1 < n ? s + 1 : s;
    m.transition[m.index(s, 0, left)] = 1.0;
    m.transition[m.index(s, 1, right)] = 1.0;
    if (s + 1 == n) m.reward[m.index(s, 1, right)] = 1.0;
  }
  return m;
}

}  // namespace mbtl::oracle
