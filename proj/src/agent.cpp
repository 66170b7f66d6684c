#include "mbtl/agent.hpp"

#include <algorithm>

#include "mbtl/errors.hpp"

namespace mbtl {

nlohmann::json dims_to_json(const AgentDims& d) {
  return {{"obs_dim", d.obs_dim}, {"action_dim", d.action_dim}, {"deter", d.deter},   {"stoch", d.stoch},
          {"hidden", d.hidden},   {"embed", d.embed},           {"ac_hidden", d.ac_hidden}};
}

AgentDims dims_from_json(const nlohmann::json& doc) {
  try {
    AgentDims d;
    d.obs_dim = doc.at("obs_dim").get<std::size_t>();
    d.action_dim = doc.at("action_dim").get<std::size_t>();
    d.deter = doc.at("deter").get<std::size_t>();
    d.stoch = doc.at("stoch").get<std::size_t>();
    d.hidden = doc.at("hidden").get<std::size_t>();
    d.embed = doc.at("embed").get<std::size_t>();
    d.ac_hidden = doc.at("ac_hidden").get<std::size_t>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed agent dims: ") + e.what());
  }
}

ParamStore init_agent(const AgentDims& dims, Rng& rng) {
  ParamStore p;
  WorldModel(dims.world_model()).init_params(p, rng);
  behavior::init_actor(p, dims.actor_critic(), rng);
  behavior::init_value(p, dims.actor_critic(), rng);
  return p;
}

AgentController::AgentController(const AgentDims& dims, const ParamStore& params)
    : dims_(dims), params_(params), wm_(dims.world_model()) {
  reset();
}

void AgentController::reset() {
  h_ = ad::Tensor({1, dims_.deter});
  z_ = ad::Tensor({1, dims_.stoch});
  prev_action_.assign(dims_.action_dim, 0.0);
}

std::vector<double> AgentController::act(const std::vector<double>& obs, Rng* rng, double explore) {
  if (obs.size() != dims_.obs_dim) throw std::invalid_argument("AgentController: observation size mismatch");
  ad::Tape tape;
  LatentState prev;
  prev.h = tape.constant(h_);
  prev.z = tape.constant(z_);
  ad::Var a_prev = tape.constant(ad::Tensor({1, dims_.action_dim}, prev_action_));
  ad::Var o = tape.constant(ad::Tensor({1, dims_.obs_dim}, obs));
  const LatentState s = wm_.observe_step(tape, params_, prev, a_prev, o, {});
  h_ = s.h.value();
  z_ = s.z.value();
  ad::Var a = behavior::actor_action(tape, params_, dims_.actor_critic(), s.features(), ad::Noise{rng, 1.0});
  std::vector<double> action = a.value().values();
  if (rng && explore > 0.0)
    for (double& x : action) x = std::clamp(x + explore * standard_normal(*rng), -1.0, 1.0);
  prev_action_ = action;
  return action;
}

}  // namespace mbtl
