#include "mbtl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace mbtl::envs {

namespace {

EnvSpec unit_box_spec(std::size_t obs_dim, std::size_t action_dim, std::string task_id) {
  EnvSpec s;
  s.obs_dim = obs_dim;
  s.action_dim = action_dim;
  s.action_low.assign(action_dim, -1.0);
  s.action_high.assign(action_dim, 1.0);
  s.task_id = std::move(task_id);
  return s;
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

constexpr double kPendulumDt = 0.05;
constexpr double kGravity = 15.0;
constexpr double kTorque = 6.0;
constexpr double kFriction = 0.1;
constexpr double kCoupling = 2.0;
constexpr double kMaxSpeed = 8.0;
constexpr double kForceGain = 2.0;
constexpr double kArena = 2.0;

}  // namespace

double Episode::total_reward() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }

std::vector<double> Env::reset(Rng& rng) {
  t_ = 0;
  started_ = true;
  auto obs = do_reset(rng);
  return obs;
}

std::vector<double> Env::clip_action(std::span<const double> action) const {
  const EnvSpec& s = spec();
  if (action.size() != s.action_dim) {
    throw std::invalid_argument("step: action has " + std::to_string(action.size()) + " entries, expected " +
                                std::to_string(s.action_dim));
  }
  std::vector<double> out(action.begin(), action.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) throw std::invalid_argument("step: non-finite action");
    out[i] = std::clamp(out[i], s.action_low[i], s.action_high[i]);
  }
  return out;
}

StepResult Env::step(std::span<const double> action) {
  if (!started_) throw std::logic_error("step: reset() has not been called");
  if (done()) throw std::logic_error("step: episode already finished");
  const auto clipped = clip_action(action);
  auto [obs, reward] = do_step(clipped);
  ++t_;
  return {std::move(obs), reward, done()};
}

GridworldEnv::GridworldEnv(std::size_t side, std::string task_id)
    : mdp_(mdp::gridworld_mdp(side)), spec_(unit_box_spec(side * side, 4, std::move(task_id))) {}

std::vector<double> GridworldEnv::observe() const {
  std::vector<double> o(mdp_.n_states, 0.0);
  o[state_] = 1.0;
  return o;
}

std::vector<double> GridworldEnv::do_reset(Rng& rng) {
  rng_ = Rng(rng());
  state_ = uniform_index(rng, mdp_.n_states - 1);  // any cell but the goal
  return observe();
}

std::pair<std::vector<double>, double> GridworldEnv::do_step(std::span<const double> action) {
  const auto a = static_cast<std::size_t>(std::distance(action.begin(), std::max_element(action.begin(), action.end())));
  const auto [next, reward] = mdp::sample_transition(mdp_, state_, a, rng_);
  state_ = next;
  return {observe(), reward};
}

PointMassEnv::PointMassEnv(PointMassParams params, std::string task_id)
    : params_(std::move(params)), spec_(unit_box_spec(2 * params_.dim, params_.dim, std::move(task_id))) {
  if (params_.dim == 0 || params_.target.size() != params_.dim) {
    throw std::invalid_argument("PointMassEnv: target must have one entry per dimension");
  }
  if (!(params_.drag >= 0.0 && params_.drag < 1.0) || !(params_.dt > 0.0)) {
    throw std::invalid_argument("PointMassEnv: drag must lie in [0, 1) and dt must be positive");
  }
  pos_.assign(params_.dim, 0.0);
  vel_.assign(params_.dim, 0.0);
}

double PointMassEnv::potential() const {
  double d2 = 0.0;
  for (std::size_t i = 0; i < params_.dim; ++i) d2 += (pos_[i] - params_.target[i]) * (pos_[i] - params_.target[i]);
  return -std::sqrt(d2) / params_.dt;
}

void PointMassEnv::set_state(std::vector<double> position, std::vector<double> velocity) {
  if (position.size() != params_.dim || velocity.size() != params_.dim) {
    throw std::invalid_argument("PointMassEnv::set_state: dimension mismatch");
  }
  pos_ = std::move(position);
  vel_ = std::move(velocity);
}

std::vector<double> PointMassEnv::observe() const {
  std::vector<double> o = pos_;
  o.insert(o.end(), vel_.begin(), vel_.end());
  return o;
}

std::vector<double> PointMassEnv::do_reset(Rng& rng) {
  for (std::size_t i = 0; i < params_.dim; ++i) {
    pos_[i] = uniform(rng, -1.0, -0.5);
    vel_[i] = 0.0;
  }
  return observe();
}

std::pair<std::vector<double>, double> PointMassEnv::do_step(std::span<const double> action) {
  const double before = potential();
  for (std::size_t i = 0; i < params_.dim; ++i) {
    vel_[i] = (1.0 - params_.drag) * vel_[i] + params_.dt * kForceGain * action[i];
    pos_[i] += params_.dt * vel_[i];
    if (std::abs(pos_[i]) > kArena) {
      pos_[i] = std::clamp(pos_[i], -kArena, kArena);
      vel_[i] = 0.0;
    }
  }
  const double progress = potential() - before;
  return {observe(), params_.alive_bonus + progress};
}

PendulumEnv::PendulumEnv(std::size_t poles, std::string task_id)
    : spec_(unit_box_spec(3 * poles, poles, std::move(task_id))), theta_(poles, 0.0), omega_(poles, 0.0) {
  if (poles == 0) throw std::invalid_argument("PendulumEnv: at least one pole");
}

void PendulumEnv::set_state(std::vector<double> angles, std::vector<double> velocities) {
  if (angles.size() != theta_.size() || velocities.size() != omega_.size()) {
    throw std::invalid_argument("PendulumEnv::set_state: dimension mismatch");
  }
  theta_ = std::move(angles);
  omega_ = std::move(velocities);
}

double PendulumEnv::upright_reward() const {
  double r = 0.0;
  for (double th : theta_) r += std::cos(th);
  return r;
}

std::vector<double> PendulumEnv::observe() const {
  std::vector<double> o;
  for (std::size_t i = 0; i < theta_.size(); ++i) {
    o.push_back(std::cos(theta_[i]));
    o.push_back(std::sin(theta_[i]));
    o.push_back(omega_[i]);
  }
  return o;
}

std::vector<double> PendulumEnv::do_reset(Rng& rng) {
  for (std::size_t i = 0; i < theta_.size(); ++i) {
    theta_[i] = wrap_angle(std::numbers::pi + uniform(rng, -0.2, 0.2));
    omega_[i] = 0.0;
  }
  return observe();
}

std::pair<std::vector<double>, double> PendulumEnv::do_step(std::span<const double> action) {
  const std::size_t n = theta_.size();
  std::vector<double> accel(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = kGravity * std::sin(theta_[i]) + kTorque * action[i] - kFriction * omega_[i];
    if (i > 0) a += kCoupling * std::sin(theta_[i - 1] - theta_[i]);
    if (i + 1 < n) a += kCoupling * std::sin(theta_[i + 1] - theta_[i]);
    accel[i] = a;
  }
  for (std::size_t i = 0; i < n; ++i) {
    omega_[i] = std::clamp(omega_[i] + kPendulumDt * accel[i], -kMaxSpeed, kMaxSpeed);
    theta_[i] = wrap_angle(theta_[i] + kPendulumDt * omega_[i]);
  }
  return {observe(), upright_reward()};
}

MirrorEnv::MirrorEnv(std::unique_ptr<Env> inner, std::string task_id) : inner_(std::move(inner)) {
  if (!inner_) throw std::invalid_argument("MirrorEnv: null environment");
  spec_ = inner_->spec();
  spec_.task_id = std::move(task_id);
}

std::vector<double> MirrorEnv::do_reset(Rng& rng) { return inner_->reset(rng); }

std::pair<std::vector<double>, double> MirrorEnv::do_step(std::span<const double> action) {
  StepResult r = inner_->step(action);
  return {std::move(r.obs), -r.reward};
}

PaddedEnv::PaddedEnv(std::unique_ptr<Env> inner, std::size_t target_dim) : inner_(std::move(inner)) {
  if (!inner_) throw std::invalid_argument("PaddedEnv: null environment");
  spec_ = inner_->spec();
  if (target_dim < spec_.action_dim) {
    throw std::invalid_argument("pad_action_space: target dim " + std::to_string(target_dim) +
                                " is below the native dim " + std::to_string(spec_.action_dim));
  }
  spec_.action_low.resize(target_dim, -1.0);
  spec_.action_high.resize(target_dim, 1.0);
  spec_.action_dim = target_dim;
}

std::vector<double> PaddedEnv::do_reset(Rng& rng) { return inner_->reset(rng); }

std::pair<std::vector<double>, double> PaddedEnv::do_step(std::span<const double> action) {
  StepResult r = inner_->step(action.first(inner_->spec().action_dim));
  return {std::move(r.obs), r.reward};
}

std::unique_ptr<Env> pad_action_space(std::unique_ptr<Env> env, std::size_t target_dim) {
  if (env && env->spec().action_dim == target_dim) return env;
  return std::make_unique<PaddedEnv>(std::move(env), target_dim);
}

std::size_t max_action_dim(std::span<const EnvSpec> specs) {
  if (specs.empty()) throw std::invalid_argument("max_action_dim: no environment specs");
  std::size_t m = 0;
  for (const auto& s : specs) m = std::max(m, s.action_dim);
  return m;
}

std::vector<std::string> task_names() {
  return {"gridworld", "pointmass_a", "pointmass_a_prime", "pointmass_a_dprime", "pointmass3_a",
          "pendulum",  "double_pendulum"};
}

std::unique_ptr<Env> make_env(const std::string& task) {
  static const std::string mirror = "mirror_";
  if (task.starts_with(mirror)) return std::make_unique<MirrorEnv>(make_env(task.substr(mirror.size())), task);
  if (task == "gridworld") return std::make_unique<GridworldEnv>(5, task);
  if (task == "pointmass_a") return std::make_unique<PointMassEnv>(PointMassParams{}, task);
  if (task == "pointmass_a_prime") {
    return std::make_unique<PointMassEnv>(PointMassParams{.target = {0.4, 0.6}, .drag = 0.5}, task);
  }
  if (task == "pointmass_a_dprime") {
    return std::make_unique<PointMassEnv>(PointMassParams{.target = {0.6, 0.3}, .drag = 0.45}, task);
  }
  if (task == "pointmass3_a") {
    return std::make_unique<PointMassEnv>(PointMassParams{.dim = 3, .target = {0.5, 0.5, 0.5}}, task);
  }
  if (task == "pendulum") return std::make_unique<PendulumEnv>(1, task);
  if (task == "double_pendulum") return std::make_unique<PendulumEnv>(2, task);
  throw std::invalid_argument("unknown task '" + task + "'");
}

}  // namespace mbtl::envs
