#pragma once

#include <span>
#include <vector>

#include "mbtl/latent.hpp"
#include "mbtl/optim.hpp"
#include "mbtl/param_store.hpp"
#include "mbtl/tape.hpp"

namespace mbtl::behavior {

inline constexpr std::size_t kDefaultHorizon = 15;
inline constexpr double kDefaultGamma = 0.99;
inline constexpr double kDefaultLambda = 0.95;

struct ActorCriticDims {
  std::size_t feature_dim = 0;
  std::size_t action_dim = 0;
  std::size_t hidden = 32;
};

/// Registers actor/l0..l2 (actor_hidden, actor_hidden, actor_last) and
/// value/l0..l2 (value_hidden, value_hidden, value_last). The actor's last
/// layer emits [mean, log_std] of size 2·action_dim.
void init_actor(ParamStore& params, const ActorCriticDims& dims, Rng& rng, bool zero_last = false);
void init_value(ParamStore& params, const ActorCriticDims& dims, Rng& rng, bool zero_last = false);

/// tanh(mean + exp(clamp(log_std))·ε); in noise-free mode tanh(mean).
ad::Var actor_action(ad::Tape& tape, const ParamStore& params, const ActorCriticDims& dims, ad::Var features,
                     ad::Noise noise);
/// [n×1]
ad::Var value_estimate(ad::Tape& tape, const ParamStore& params, const ActorCriticDims& dims, ad::Var features);

/// Imagined rollout s_0..s_H with actions a_0..a_H sampled from the actor,
/// rewards r_n = reward(s_{n+1}) for n < H and values v(s_0..s_H). Every
/// quantity stays on the tape.
struct ImaginedTrajectory {
  std::vector<LatentState> states;
  std::vector<ad::Var> actions;
  std::vector<ad::Var> rewards;
  std::vector<ad::Var> values;

  std::size_t horizon() const { return rewards.size(); }
};

ImaginedTrajectory imagine_trajectory(ad::Tape& tape, const LatentDynamics& dynamics, const ParamStore& params,
                                      const ActorCriticDims& dims, const LatentState& start, std::size_t horizon,
                                      ad::Noise noise);

/// Linear weights of a return estimator: estimate(τ) = Σ_n reward[τ][n]·r_n +
/// Σ_j value[τ][j]·v_j for τ = 0..H.
struct ReturnWeights {
  std::vector<std::vector<double>> reward;  // (H+1) × H
  std::vector<std::vector<double>> value;   // (H+1) × (H+1)
};

/// V_N^k(s_τ) = Σ_{n=τ}^{h−1} γ^{n−τ} r_n + γ^{h−τ} v(s_h), h = min(τ+k, H).
ReturnWeights n_step_weights(std::size_t horizon, std::size_t k, double gamma);
/// V_λ(s_τ) = (1−λ) Σ_{n=1}^{H−1} λ^{n−1} V_N^n(s_τ) + λ^{H−1} V_N^H(s_τ), with 0⁰ = 1.
ReturnWeights lambda_weights(std::size_t horizon, double lambda, double gamma);

std::vector<double> apply_weights(const ReturnWeights& w, std::span<const double> rewards,
                                  std::span<const double> values);

/// Scalar-trajectory estimators: rewards has length H ≥ 1, values H + 1.
/// Both return H + 1 entries; the last is v(s_H).
std::vector<double> v_n_k(std::span<const double> rewards, std::span<const double> values, std::size_t k,
                          double gamma);
std::vector<double> v_lambda(std::span<const double> rewards, std::span<const double> values, double lambda,
                             double gamma);

/// V_λ for every row of a taped trajectory: [n × (H+1)].
ad::Var lambda_returns(const ImaginedTrajectory& traj, double lambda, double gamma);

struct ReturnConfig {
  double lambda = kDefaultLambda;
  double gamma = kDefaultGamma;
};

/// Gradient of −mean_rows Σ_τ V_λ(s_τ) restricted to `actor/` parameters.
/// Consumes the trajectory's tape.
ad::Gradients actor_gradients(ad::Tape& tape, const ImaginedTrajectory& traj, const ReturnConfig& cfg);

/// Ascent step on Σ_τ V_λ; gradients reach the actor through dynamics,
/// reward and value heads, but only `actor/` entries change.
ParamStore actor_update(const ParamStore& params, ad::Tape& tape, const ImaginedTrajectory& traj,
                        const ReturnConfig& cfg, Optimizer& optimizer);

/// Regression targets and inputs for the value head, detached from the tape.
struct ValueTargets {
  std::vector<ad::Tensor> features;  // (H+1) × [n×feature_dim]
  ad::Tensor targets;                // [n × (H+1)]
};

ValueTargets value_targets(const ImaginedTrajectory& traj, const ReturnConfig& cfg);

/// mean_rows Σ_τ ½ (v(s_τ) − sg(V_λ(s_τ)))² on a fresh tape.
ad::Var value_loss(ad::Tape& tape, const ParamStore& params, const ActorCriticDims& dims, const ValueTargets& vt);
ad::Gradients value_gradients(const ParamStore& params, const ActorCriticDims& dims, const ValueTargets& vt);

/// Descent step on the value regression loss; only `value/` entries change.
ParamStore value_update(const ParamStore& params, const ActorCriticDims& dims, const ValueTargets& vt,
                        Optimizer& optimizer);

/// Keeps the entries whose names start with prefix.
ad::Gradients filter_gradients(const ad::Gradients& grads, std::string_view prefix);

}  // namespace mbtl::behavior
