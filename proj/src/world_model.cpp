#include "mbtl/world_model.hpp"

#include <stdexcept>
#include <string>

#include "mbtl/nn.hpp"

namespace mbtl {

namespace {

using ad::Var;

nn::MlpSpec encoder_spec(const WorldModelDims& d) {
  return {"wm/enc", {d.obs_dim, d.hidden, d.embed}, ComponentTag::encoder, ComponentTag::encoder};
}
nn::MlpSpec posterior_spec(const WorldModelDims& d) {
  return {"wm/post", {d.deter + d.embed, d.hidden, 2 * d.stoch}, ComponentTag::encoder, ComponentTag::encoder};
}
nn::MlpSpec prior_spec(const WorldModelDims& d) {
  return {"wm/prior", {d.deter, d.hidden, 2 * d.stoch}, ComponentTag::transition, ComponentTag::transition};
}
nn::MlpSpec reward_spec(const WorldModelDims& d) {
  return {"wm/reward", {d.feature_dim(), d.hidden, d.hidden, 1}, ComponentTag::reward_hidden,
          ComponentTag::reward_last};
}
nn::MlpSpec decoder_spec(const WorldModelDims& d) {
  return {"wm/dec", {d.feature_dim(), d.hidden, d.obs_dim}, ComponentTag::decoder, ComponentTag::decoder};
}

Var P(ad::Tape& t, const ParamStore& p, const std::string& name) { return t.param(name, p.value(name)); }

}  // namespace

WorldModel::WorldModel(WorldModelDims dims) : dims_(dims) {
  if (dims_.obs_dim == 0 || dims_.action_dim == 0 || dims_.deter == 0 || dims_.stoch == 0 || dims_.hidden == 0 ||
      dims_.embed == 0) {
    throw std::invalid_argument("WorldModel: all dimensions must be positive");
  }
}

void WorldModel::init_params(ParamStore& params, Rng& rng, bool zero_reward_last) const {
  const auto& d = dims_;
  nn::add_mlp(params, encoder_spec(d), rng);
  nn::add_mlp(params, posterior_spec(d), rng);
  params.add("wm/core/in_z/w", glorot_uniform(d.stoch, d.hidden, rng), ComponentTag::transition);
  params.add("wm/core/in_a/w", glorot_uniform(d.action_dim, d.hidden, rng), ComponentTag::action_input);
  params.add("wm/core/in/b", ad::Tensor({d.hidden}), ComponentTag::transition);
  nn::add_dense(params, "wm/core/gate", d.hidden + d.deter, d.deter, ComponentTag::transition, rng);
  nn::add_dense(params, "wm/core/cand", d.hidden + d.deter, d.deter, ComponentTag::transition, rng);
  nn::add_mlp(params, prior_spec(d), rng);
  auto rs = reward_spec(d);
  rs.zero_last = zero_reward_last;
  nn::add_mlp(params, rs, rng);
  nn::add_mlp(params, decoder_spec(d), rng);
}

LatentState WorldModel::initial_state(ad::Tape& tape, std::size_t batch) const {
  LatentState s;
  s.h = tape.constant(ad::Tensor({batch, dims_.deter}));
  s.z = tape.constant(ad::Tensor({batch, dims_.stoch}));
  s.mu = s.z;
  s.log_std = tape.constant(ad::Tensor({batch, dims_.stoch}));
  s.prior_mu = s.mu;
  s.prior_log_std = s.log_std;
  return s;
}

void WorldModel::check_cols(const Var& v, std::size_t cols, const char* what) const {
  if (v.value().cols() != cols) {
    throw std::invalid_argument(std::string("WorldModel: ") + what + " has " + std::to_string(v.value().cols()) +
                                " columns, expected " + std::to_string(cols));
  }
}

Var WorldModel::embed(ad::Tape& tape, const ParamStore& params, Var obs) const {
  check_cols(obs, dims_.obs_dim, "observation");
  return nn::mlp(tape, params, encoder_spec(dims_), obs);
}

Var WorldModel::recurrent(ad::Tape& tape, const ParamStore& params, const LatentState& prev, Var action) const {
  check_cols(action, dims_.action_dim, "action");
  check_cols(prev.h, dims_.deter, "h");
  check_cols(prev.z, dims_.stoch, "z");
  Var x = ad::add(ad::matmul(prev.z, P(tape, params, "wm/core/in_z/w")),
                  ad::matmul(action, P(tape, params, "wm/core/in_a/w")));
  x = ad::relu(ad::add_row(x, P(tape, params, "wm/core/in/b")));
  Var xh = ad::concat_cols({x, prev.h});
  Var u = ad::sigmoid(nn::dense(tape, params, "wm/core/gate", xh));
  Var c = ad::tanh(nn::dense(tape, params, "wm/core/cand", xh));
  // (1 − u) ⊙ h + u ⊙ c  ==  h + u ⊙ (c − h)
  return ad::add(prev.h, ad::mul(u, ad::sub(c, prev.h)));
}

LatentState WorldModel::imagine_step(ad::Tape& tape, const ParamStore& params, const LatentState& prev, Var action,
                                     ad::Noise noise) const {
  LatentState next;
  next.h = recurrent(tape, params, prev, action);
  Var stats = nn::mlp(tape, params, prior_spec(dims_), next.h);
  next.mu = ad::slice_cols(stats, 0, dims_.stoch);
  next.log_std = ad::slice_cols(stats, dims_.stoch, dims_.stoch);
  next.z = ad::gaussian_sample(next.mu, next.log_std, noise);
  next.prior_mu = next.mu;
  next.prior_log_std = next.log_std;
  return next;
}

LatentState WorldModel::observe_step(ad::Tape& tape, const ParamStore& params, const LatentState& prev,
                                     Var prev_action, Var obs, ad::Noise noise) const {
  LatentState next;
  next.h = recurrent(tape, params, prev, prev_action);
  Var prior = nn::mlp(tape, params, prior_spec(dims_), next.h);
  next.prior_mu = ad::slice_cols(prior, 0, dims_.stoch);
  next.prior_log_std = ad::slice_cols(prior, dims_.stoch, dims_.stoch);
  Var e = embed(tape, params, obs);
  Var post = nn::mlp(tape, params, posterior_spec(dims_), ad::concat_cols({next.h, e}));
  next.mu = ad::slice_cols(post, 0, dims_.stoch);
  next.log_std = ad::slice_cols(post, dims_.stoch, dims_.stoch);
  next.z = ad::gaussian_sample(next.mu, next.log_std, noise);
  return next;
}

Var WorldModel::predict_reward(ad::Tape& tape, const ParamStore& params, const LatentState& state) const {
  return nn::mlp(tape, params, reward_spec(dims_), state.features());
}

Var WorldModel::decode(ad::Tape& tape, const ParamStore& params, const LatentState& state) const {
  return nn::mlp(tape, params, decoder_spec(dims_), state.features());
}

Var WorldModel::loss(ad::Tape& tape, const ParamStore& params, const SequenceBatch& batch, ad::Noise noise,
                     const WorldModelLossWeights& weights, WorldModelLossParts* parts,
                     std::vector<LatentState>* posteriors) const {
  const std::size_t len = batch.length();
  if (len < 2) throw std::invalid_argument("WorldModel::loss: sequences must have length >= 2");
  if (batch.prev_action.size() != len || batch.reward.size() != len || batch.reward_mask.size() != len) {
    throw std::invalid_argument("WorldModel::loss: per-step arrays disagree in length");
  }
  const std::size_t n = batch.batch();
  LatentState state = initial_state(tape, n);
  std::vector<Var> recon_terms, reward_terms, kl_terms;
  double mask_total = 0.0;
  for (const auto& m : batch.reward_mask)
    for (double v : m.data()) mask_total += v;

  for (std::size_t t = 0; t < len; ++t) {
    state = observe_step(tape, params, state, tape.constant(batch.prev_action[t]), tape.constant(batch.obs[t]), noise);
    if (posteriors) posteriors->push_back(state);
    recon_terms.push_back(ad::mse_loss(tape.constant(batch.obs[t]), decode(tape, params, state)));
    kl_terms.push_back(ad::mean(ad::kl_diag_gaussian(state.mu, state.log_std, state.prior_mu, state.prior_log_std)));
    if (mask_total > 0.0) {
      Var err = ad::sub(predict_reward(tape, params, state), tape.constant(batch.reward[t]));
      reward_terms.push_back(ad::sum(ad::mul(ad::square(err), tape.constant(batch.reward_mask[t]))));
    }
  }

  const double inv_len = 1.0 / static_cast<double>(len);
  Var recon = ad::scale(ad::sum(ad::concat_cols(recon_terms)), inv_len);
  Var kl = ad::scale(ad::sum(ad::concat_cols(kl_terms)), inv_len);
  Var total = ad::add(ad::scale(recon, weights.recon), ad::scale(kl, weights.kl));
  double reward_value = 0.0;
  if (!reward_terms.empty()) {
    // ½ squared error averaged over the masked (b, t) entries
    Var reward = ad::scale(ad::sum(ad::concat_cols(reward_terms)), 0.5 / mask_total);
    reward_value = reward.value().item();
    total = ad::add(total, ad::scale(reward, weights.reward));
  }
  if (parts) *parts = {recon.value().item(), reward_value, kl.value().item()};
  return total;
}

}  // namespace mbtl
