#pragma once

#include <vector>

#include "mbtl/latent.hpp"
#include "mbtl/param_store.hpp"
#include "mbtl/tape.hpp"

namespace mbtl {

struct WorldModelDims {
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  std::size_t deter = 16;   // H_h
  std::size_t stoch = 8;    // H_z
  std::size_t hidden = 32;
  std::size_t embed = 32;

  std::size_t feature_dim() const { return deter + stoch; }
  bool operator==(const WorldModelDims&) const = default;
};

struct WorldModelLossWeights {
  double recon = 1.0;
  double reward = 1.0;
  double kl = 1.0;  // β
};

/// B sequences of length L, laid out per time step. Step t of sequence b
/// sees observation obs[t] (row b), the action that led to it and the reward
/// received on arrival. reward_mask is 0 where no reward precedes the step.
struct SequenceBatch {
  std::vector<ad::Tensor> obs;          // L × [B×obs_dim]
  std::vector<ad::Tensor> prev_action;  // L × [B×action_dim]
  std::vector<ad::Tensor> reward;       // L × [B×1]
  std::vector<ad::Tensor> reward_mask;  // L × [B×1]

  std::size_t length() const { return obs.size(); }
  std::size_t batch() const { return obs.empty() ? 0 : obs.front().rows(); }
};

struct WorldModelLossParts {
  double recon = 0.0;
  double reward = 0.0;
  double kl = 0.0;
};

/// Recurrent state-space world model: encoder, posterior (representation)
/// head, gated recurrent core with a prior (transition) head, reward head and
/// decoder. Parameters live in a ParamStore under the `wm/` prefix; the
/// model object itself only carries dimensions.
///
///   x   = relu(z W_z + a W_a + b)            W_a tagged action_input
///   u   = sigmoid([x, h] W_u + b_u)
///   c   = tanh([x, h] W_c + b_c)
///   h'  = (1 − u) ⊙ h + u ⊙ c
///   prior     (mu, log_std) = MLP(h')
///   posterior (mu, log_std) = MLP([h', enc(o)])
class WorldModel final : public LatentDynamics {
 public:
  explicit WorldModel(WorldModelDims dims);

  const WorldModelDims& dims() const { return dims_; }
  std::size_t feature_dim() const override { return dims_.feature_dim(); }
  std::size_t action_dim() const override { return dims_.action_dim; }

  /// Registers every `wm/` parameter. zero_reward_last / zero_decoder_last
  /// start those output layers at zero.
  void init_params(ParamStore& params, Rng& rng, bool zero_reward_last = false) const;

  LatentState initial_state(ad::Tape& tape, std::size_t batch) const;

  ad::Var embed(ad::Tape& tape, const ParamStore& params, ad::Var obs) const;

  LatentState observe_step(ad::Tape& tape, const ParamStore& params, const LatentState& prev, ad::Var prev_action,
                           ad::Var obs, ad::Noise noise) const;
  LatentState imagine_step(ad::Tape& tape, const ParamStore& params, const LatentState& prev, ad::Var action,
                           ad::Noise noise) const override;
  ad::Var predict_reward(ad::Tape& tape, const ParamStore& params, const LatentState& state) const override;
  ad::Var decode(ad::Tape& tape, const ParamStore& params, const LatentState& state) const;

  /// Mean over time of recon MSE + reward MSE + β·KL(posterior ‖ prior).
  /// When `posteriors` is non-null it receives the per-step latent states.
  ad::Var loss(ad::Tape& tape, const ParamStore& params, const SequenceBatch& batch, ad::Noise noise,
               const WorldModelLossWeights& weights = {}, WorldModelLossParts* parts = nullptr,
               std::vector<LatentState>* posteriors = nullptr) const;

 private:
  ad::Var recurrent(ad::Tape& tape, const ParamStore& params, const LatentState& prev, ad::Var action) const;
  void check_cols(const ad::Var& v, std::size_t cols, const char* what) const;

  WorldModelDims dims_;
};

}  // namespace mbtl
