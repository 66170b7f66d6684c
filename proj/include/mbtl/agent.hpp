#pragma once

#include <vector>

#include "json.hpp"
#include "mbtl/behavior.hpp"
#include "mbtl/world_model.hpp"

namespace mbtl {

/// Shapes of a complete Dreamer-style agent.
struct AgentDims {
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  std::size_t deter = 16;
  std::size_t stoch = 8;
  std::size_t hidden = 32;
  std::size_t embed = 32;
  std::size_t ac_hidden = 32;

  WorldModelDims world_model() const { return {obs_dim, action_dim, deter, stoch, hidden, embed}; }
  behavior::ActorCriticDims actor_critic() const { return {deter + stoch, action_dim, ac_hidden}; }
  bool operator==(const AgentDims&) const = default;
};

nlohmann::json dims_to_json(const AgentDims& d);
AgentDims dims_from_json(const nlohmann::json& doc);

/// World model, actor and value parameters for freshly initialized agent.
ParamStore init_agent(const AgentDims& dims, Rng& rng);

/// Filters observations into the latent state and picks actions. The latent
/// is carried between steps as plain tensors.
class AgentController {
 public:
  AgentController(const AgentDims& dims, const ParamStore& params);

  void reset();
  /// Folds in the observation reached after prev_action (zeros on the first
  /// step) and returns the next action. With rng == nullptr the actor mean is
  /// used; otherwise the actor samples and Gaussian exploration noise of
  /// scale explore is added before clipping to [−1, 1].
  std::vector<double> act(const std::vector<double>& obs, Rng* rng = nullptr, double explore = 0.0);

 private:
  AgentDims dims_;
  const ParamStore& params_;
  WorldModel wm_;
  ad::Tensor h_, z_;
  std::vector<double> prev_action_;
};

}  // namespace mbtl
