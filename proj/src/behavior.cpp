#include "mbtl/behavior.hpp"

#include <cmath>
#include <stdexcept>

#include "mbtl/nn.hpp"

namespace mbtl::behavior {

namespace {

using ad::Var;

nn::MlpSpec actor_spec(const ActorCriticDims& d) {
  return {"actor", {d.feature_dim, d.hidden, d.hidden, 2 * d.action_dim}, ComponentTag::actor_hidden,
          ComponentTag::actor_last};
}

nn::MlpSpec value_spec(const ActorCriticDims& d) {
  return {"value", {d.feature_dim, d.hidden, d.hidden, 1}, ComponentTag::value_hidden, ComponentTag::value_last};
}

void check_horizon(std::size_t horizon) {
  if (horizon < 1) throw std::invalid_argument("return estimate needs a trajectory with H >= 1");
}

void check_features(Var f, const ActorCriticDims& d) {
  if (f.value().cols() != d.feature_dim) {
    throw std::invalid_argument("actor/value: feature width " + std::to_string(f.value().cols()) + ", expected " +
                                std::to_string(d.feature_dim));
  }
}

// Transposed coefficient matrix so that estimates = inputs · M.
ad::Tensor coefficient_matrix(const std::vector<std::vector<double>>& rows, std::size_t inputs) {
  const std::size_t outputs = rows.size();
  ad::Tensor m({inputs, outputs});
  for (std::size_t tau = 0; tau < outputs; ++tau)
    for (std::size_t i = 0; i < inputs; ++i) m.at(i, tau) = rows[tau][i];
  return m;
}

}  // namespace

void init_actor(ParamStore& params, const ActorCriticDims& dims, Rng& rng, bool zero_last) {
  auto spec = actor_spec(dims);
  spec.zero_last = zero_last;
  nn::add_mlp(params, spec, rng);
}

void init_value(ParamStore& params, const ActorCriticDims& dims, Rng& rng, bool zero_last) {
  auto spec = value_spec(dims);
  spec.zero_last = zero_last;
  nn::add_mlp(params, spec, rng);
}

Var actor_action(ad::Tape& tape, const ParamStore& params, const ActorCriticDims& dims, Var features,
                 ad::Noise noise) {
  check_features(features, dims);
  Var out = nn::mlp(tape, params, actor_spec(dims), features);
  Var mean = ad::slice_cols(out, 0, dims.action_dim);
  Var log_std = ad::slice_cols(out, dims.action_dim, dims.action_dim);
  return ad::tanh(ad::gaussian_sample(mean, log_std, noise));
}

Var value_estimate(ad::Tape& tape, const ParamStore& params, const ActorCriticDims& dims, Var features) {
  check_features(features, dims);
  return nn::mlp(tape, params, value_spec(dims), features);
}

ImaginedTrajectory imagine_trajectory(ad::Tape& tape, const LatentDynamics& dynamics, const ParamStore& params,
                                      const ActorCriticDims& dims, const LatentState& start, std::size_t horizon,
                                      ad::Noise noise) {
  check_horizon(horizon);
  if (dynamics.action_dim() != dims.action_dim || dynamics.feature_dim() != dims.feature_dim) {
    throw std::invalid_argument("imagine_trajectory: actor dims disagree with the dynamics model");
  }
  ImaginedTrajectory traj;
  traj.states.push_back(start);
  for (std::size_t tau = 0; tau <= horizon; ++tau) {
    Var f = traj.states[tau].features();
    traj.actions.push_back(actor_action(tape, params, dims, f, noise));
    traj.values.push_back(value_estimate(tape, params, dims, f));
    if (tau < horizon) {
      traj.states.push_back(dynamics.imagine_step(tape, params, traj.states[tau], traj.actions[tau], noise));
      traj.rewards.push_back(dynamics.predict_reward(tape, params, traj.states[tau + 1]));
    }
  }
  return traj;
}

ReturnWeights n_step_weights(std::size_t horizon, std::size_t k, double gamma) {
  check_horizon(horizon);
  if (k < 1) throw std::invalid_argument("n_step_weights: k must be >= 1");
  ReturnWeights w;
  w.reward.assign(horizon + 1, std::vector<double>(horizon, 0.0));
  w.value.assign(horizon + 1, std::vector<double>(horizon + 1, 0.0));
  for (std::size_t tau = 0; tau <= horizon; ++tau) {
    const std::size_t h = std::min(tau + k, horizon);
    for (std::size_t n = tau; n < h; ++n) w.reward[tau][n] = std::pow(gamma, static_cast<double>(n - tau));
    w.value[tau][h] = std::pow(gamma, static_cast<double>(h - tau));
  }
  return w;
}

ReturnWeights lambda_weights(std::size_t horizon, double lambda, double gamma) {
  check_horizon(horizon);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda_weights: lambda must lie in [0, 1]");
  ReturnWeights w;
  w.reward.assign(horizon + 1, std::vector<double>(horizon, 0.0));
  w.value.assign(horizon + 1, std::vector<double>(horizon + 1, 0.0));
  auto accumulate = [&](double mix, const ReturnWeights& part) {
    for (std::size_t tau = 0; tau <= horizon; ++tau) {
      for (std::size_t n = 0; n < horizon; ++n) w.reward[tau][n] += mix * part.reward[tau][n];
      for (std::size_t j = 0; j <= horizon; ++j) w.value[tau][j] += mix * part.value[tau][j];
    }
  };
  for (std::size_t n = 1; n + 1 <= horizon; ++n) {
    // std::pow(0, 0) == 1, which keeps the λ = 0 identity exact
    accumulate((1.0 - lambda) * std::pow(lambda, static_cast<double>(n - 1)), n_step_weights(horizon, n, gamma));
  }
  accumulate(std::pow(lambda, static_cast<double>(horizon - 1)), n_step_weights(horizon, horizon, gamma));
  return w;
}

std::vector<double> apply_weights(const ReturnWeights& w, std::span<const double> rewards,
                                  std::span<const double> values) {
  const std::size_t horizon = w.reward.size() - 1;
  if (rewards.size() != horizon || values.size() != horizon + 1) {
    throw std::invalid_argument("apply_weights: trajectory length disagrees with the weights");
  }
  std::vector<double> out(horizon + 1, 0.0);
  for (std::size_t tau = 0; tau <= horizon; ++tau) {
    double acc = 0.0;
    for (std::size_t n = 0; n < horizon; ++n) acc += w.reward[tau][n] * rewards[n];
    for (std::size_t j = 0; j <= horizon; ++j) acc += w.value[tau][j] * values[j];
    out[tau] = acc;
  }
  return out;
}

std::vector<double> v_n_k(std::span<const double> rewards, std::span<const double> values, std::size_t k,
                          double gamma) {
  check_horizon(rewards.size());
  return apply_weights(n_step_weights(rewards.size(), k, gamma), rewards, values);
}

std::vector<double> v_lambda(std::span<const double> rewards, std::span<const double> values, double lambda,
                             double gamma) {
  check_horizon(rewards.size());
  return apply_weights(lambda_weights(rewards.size(), lambda, gamma), rewards, values);
}

Var lambda_returns(const ImaginedTrajectory& traj, double lambda, double gamma) {
  const std::size_t horizon = traj.horizon();
  check_horizon(horizon);
  ad::Tape& tape = *traj.rewards.front().tape;
  const ReturnWeights w = lambda_weights(horizon, lambda, gamma);
  Var rewards = ad::concat_cols(traj.rewards);
  Var values = ad::concat_cols(traj.values);
  return ad::add(ad::matmul(rewards, tape.constant(coefficient_matrix(w.reward, horizon))),
                 ad::matmul(values, tape.constant(coefficient_matrix(w.value, horizon + 1))));
}

ad::Gradients filter_gradients(const ad::Gradients& grads, std::string_view prefix) {
  ad::Gradients out;
  for (const auto& [name, g] : grads)
    if (name.starts_with(prefix)) out.emplace(name, g);
  return out;
}

ad::Gradients actor_gradients(ad::Tape& tape, const ImaginedTrajectory& traj, const ReturnConfig& cfg) {
  if (tape.consumed()) throw std::logic_error("actor_gradients: trajectory tape already consumed");
  Var returns = lambda_returns(traj, cfg.lambda, cfg.gamma);
  const double rows = static_cast<double>(returns.value().rows());
  Var objective = ad::scale(ad::sum(returns), -1.0 / rows);
  return filter_gradients(tape.backward(objective), "actor/");
}

ParamStore actor_update(const ParamStore& params, ad::Tape& tape, const ImaginedTrajectory& traj,
                        const ReturnConfig& cfg, Optimizer& optimizer) {
  return optimizer.step(params, actor_gradients(tape, traj, cfg));
}

ValueTargets value_targets(const ImaginedTrajectory& traj, const ReturnConfig& cfg) {
  ValueTargets vt;
  for (const auto& s : traj.states) {
    // features() records a concat node; read the values without growing the tape
    const ad::Tensor& h = s.h.value();
    const ad::Tensor& z = s.z.value();
    const std::size_t n = h.rows(), dh = h.cols(), dz = z.cols();
    ad::Tensor f({n, dh + dz});
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < dh; ++c) f.at(r, c) = h[r * dh + c];
      for (std::size_t c = 0; c < dz; ++c) f.at(r, dh + c) = z[r * dz + c];
    }
    vt.features.push_back(std::move(f));
  }
  const std::size_t horizon = traj.horizon();
  const std::size_t n = traj.values.front().value().rows();
  const ReturnWeights w = lambda_weights(horizon, cfg.lambda, cfg.gamma);
  vt.targets = ad::Tensor({n, horizon + 1});
  std::vector<double> r(horizon), v(horizon + 1);
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t i = 0; i < horizon; ++i) r[i] = traj.rewards[i].value()[row];
    for (std::size_t j = 0; j <= horizon; ++j) v[j] = traj.values[j].value()[row];
    const auto est = apply_weights(w, r, v);
    for (std::size_t j = 0; j <= horizon; ++j) vt.targets.at(row, j) = est[j];
  }
  return vt;
}

Var value_loss(ad::Tape& tape, const ParamStore& params, const ActorCriticDims& dims, const ValueTargets& vt) {
  std::vector<Var> preds;
  for (const auto& f : vt.features) preds.push_back(value_estimate(tape, params, dims, tape.constant(f)));
  Var err = ad::sub(ad::concat_cols(preds), tape.constant(vt.targets));
  const double rows = static_cast<double>(vt.targets.rows());
  return ad::scale(ad::sum(ad::square(err)), 0.5 / rows);
}

ad::Gradients value_gradients(const ParamStore& params, const ActorCriticDims& dims, const ValueTargets& vt) {
  ad::Tape tape;
  return filter_gradients(tape.backward(value_loss(tape, params, dims, vt)), "value/");
}

ParamStore value_update(const ParamStore& params, const ActorCriticDims& dims, const ValueTargets& vt,
                        Optimizer& optimizer) {
  return optimizer.step(params, value_gradients(params, dims, vt));
}

}  // namespace mbtl::behavior
