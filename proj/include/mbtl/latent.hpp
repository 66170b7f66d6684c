#pragma once

#include "mbtl/param_store.hpp"
#include "mbtl/tape.hpp"

namespace mbtl {

/// Model state s = (h, z) for a batch of rows. h is the deterministic
/// recurrent part, z the stochastic part drawn from N(mu, exp(log_std)).
/// The prior statistics are kept on observed steps so the KL term can be
/// formed without recomputing the transition.
struct LatentState {
  ad::Var h;
  ad::Var z;
  ad::Var mu;
  ad::Var log_std;
  ad::Var prior_mu;
  ad::Var prior_log_std;

  ad::Var features() const { return ad::concat_cols({h, z}); }
};

/// Anything that can roll a latent state forward without observations and
/// score it. The world model is the production implementation; tests plug in
/// closed-form toys.
class LatentDynamics {
 public:
  virtual ~LatentDynamics() = default;
  virtual std::size_t feature_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual LatentState imagine_step(ad::Tape& tape, const ParamStore& params, const LatentState& prev,
                                   ad::Var action, ad::Noise noise) const = 0;
  /// [n×1] reward prediction for each row.
  virtual ad::Var predict_reward(ad::Tape& tape, const ParamStore& params, const LatentState& state) const = 0;
};

}  // namespace mbtl
