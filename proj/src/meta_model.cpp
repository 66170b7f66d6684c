#include "mbtl/meta_model.hpp"

#include <cstdio>
#include <stdexcept>

#include "mbtl/errors.hpp"

namespace mbtl::meta {

namespace {

ad::Tensor run_mlp(const ParamStore& params, const nn::MlpSpec& spec, const ad::Tensor& x) {
  ad::Tape tape;
  return nn::mlp(tape, params, spec, tape.constant(x)).value();
}

void require_cols(const ad::Tensor& t, std::size_t cols, const char* what) {
  if (t.shape().size() != 2 || t.cols() != cols) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(cols) + " columns");
  }
}

ad::Tensor gather_rows(const ad::Tensor& t, const std::vector<std::size_t>& rows) {
  const std::size_t c = t.cols();
  ad::Tensor out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = t.at(rows[i], j);
  return out;
}

}  // namespace

std::string format_hash(std::uint64_t hash) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

UniversalEncoder UniversalEncoder::from_params(const ParamStore& params) {
  UniversalEncoder enc;
  enc.params_ = params.section("wm/enc/");
  if (enc.params_.empty()) throw ConfigError("checkpoint has no encoder section (wm/enc/)");
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0;; ++i) {
    const std::string w = "wm/enc/l" + std::to_string(i) + "/w";
    if (!enc.params_.contains(w)) break;
    const auto& shape = enc.params_.value(w).shape();
    if (sizes.empty()) sizes.push_back(shape.at(0));
    sizes.push_back(shape.at(1));
  }
  if (sizes.size() < 2) throw ConfigError("encoder section has no layers");
  enc.spec_ = {"wm/enc", sizes, ComponentTag::encoder, ComponentTag::encoder};
  enc.hash_ = format_hash(hash_params(enc.params_));
  return enc;
}

ad::Tensor UniversalEncoder::embed(const ad::Tensor& obs) const {
  require_cols(obs, obs_dim(), "UniversalEncoder::embed");
  return run_mlp(params_, spec_, obs);
}

UniversalEncoder load_universal_encoder(const Checkpoint& ckpt) {
  if (!ckpt.params.tags().contains(ComponentTag::encoder)) throw ConfigError("checkpoint has no encoder component");
  return UniversalEncoder::from_params(ckpt.params);
}

nn::MlpSpec reward_model_spec(const std::string& prefix, std::size_t input_dim, std::size_t hidden) {
  return {prefix, {input_dim, hidden, hidden, 1}, ComponentTag::reward_hidden, ComponentTag::reward_last};
}

FrozenRewardBank::FrozenRewardBank(std::size_t latent_dim, std::size_t hidden, std::vector<BankMember> members)
    : latent_dim_(latent_dim), hidden_(hidden), members_(std::move(members)) {
  const auto spec = reward_model_spec("reward", latent_dim_, hidden_);
  for (const auto& m : members_) {
    for (std::size_t i = 0; i < spec.layers(); ++i) {
      const std::string w = spec.layer(i) + "/w";
      if (!m.params.contains(w) || m.params.value(w).shape() !=
                                       std::vector<std::size_t>{spec.sizes[i], spec.sizes[i + 1]}) {
        throw std::invalid_argument("reward bank member '" + m.label + "' does not consume a " +
                                    std::to_string(latent_dim_) + "-dim latent with hidden " +
                                    std::to_string(hidden_));
      }
    }
  }
}

std::vector<std::string> FrozenRewardBank::labels() const {
  std::vector<std::string> out;
  for (const auto& m : members_) out.push_back(m.label);
  return out;
}

ad::Tensor FrozenRewardBank::predict(const ad::Tensor& latent) const {
  require_cols(latent, latent_dim_, "FrozenRewardBank::predict");
  const std::size_t n = latent.rows();
  ad::Tensor out({n, members_.size()});
  const auto spec = reward_model_spec("reward", latent_dim_, hidden_);
  for (std::size_t j = 0; j < members_.size(); ++j) {
    const ad::Tensor col = run_mlp(members_[j].params, spec, latent);
    for (std::size_t i = 0; i < n; ++i) out.at(i, j) = col[i];
  }
  return out;
}

ad::Tensor meta_input(const ad::Tensor& latent, const FrozenRewardBank& bank) {
  const ad::Tensor g = bank.predict(latent);
  const std::size_t n = latent.rows(), N = bank.size(), M = bank.latent_dim();
  ad::Tensor out({n, N + M});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < N; ++j) out.at(i, j) = g.at(i, j);
    for (std::size_t j = 0; j < M; ++j) out.at(i, N + j) = latent.at(i, j);
  }
  return out;
}

nn::MlpSpec meta_model_spec(const MetaDims& dims) { return reward_model_spec("meta", dims.input_dim(), dims.hidden); }

void init_meta_model(ParamStore& params, const MetaDims& dims, Rng& rng, bool zero_last) {
  auto spec = meta_model_spec(dims);
  spec.zero_last = zero_last;
  nn::add_mlp(params, spec, rng);
}

ad::Var meta_predict(ad::Tape& tape, const ParamStore& params, const MetaDims& dims, ad::Var input) {
  if (input.value().cols() != dims.input_dim()) {
    throw std::invalid_argument("meta_predict: input has " + std::to_string(input.value().cols()) +
                                " columns, expected " + std::to_string(dims.input_dim()));
  }
  return nn::mlp(tape, params, meta_model_spec(dims), input);
}

ad::Tensor meta_predict(const ParamStore& params, const MetaDims& dims, const ad::Tensor& latent,
                        const FrozenRewardBank& bank) {
  if (bank.size() != dims.bank_size || bank.latent_dim() != dims.latent_dim) {
    throw std::invalid_argument("meta_predict: bank does not match the meta model dimensions");
  }
  ad::Tape tape;
  return meta_predict(tape, params, dims, tape.constant(meta_input(latent, bank))).value();
}

RewardDataset collect_reward_dataset(envs::Env& env, const UniversalEncoder& encoder, std::size_t episodes,
                                     Rng& rng) {
  const std::size_t obs_dim = env.spec().obs_dim, act_dim = env.spec().action_dim;
  if (obs_dim != encoder.obs_dim()) throw std::invalid_argument("collect_reward_dataset: encoder/env obs dim mismatch");
  std::vector<double> obs_rows, rewards;
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto ep = envs::run_episode(env, rng, [&](const std::vector<double>&) {
      std::vector<double> a(act_dim);
      for (double& x : a) x = uniform(rng, -1.0, 1.0);
      return a;
    });
    for (std::size_t t = 0; t < ep.length(); ++t) {
      obs_rows.insert(obs_rows.end(), ep.observations[t + 1].begin(), ep.observations[t + 1].end());
      rewards.push_back(ep.rewards[t]);
    }
  }
  const std::size_t n = rewards.size();
  RewardDataset ds;
  ds.latent = encoder.embed(ad::Tensor({n, obs_dim}, std::move(obs_rows)));
  ds.reward = ad::Tensor({n, 1}, std::move(rewards));
  return ds;
}

RegressionResult fit_reward_regression(ParamStore params, const nn::MlpSpec& spec, const ad::Tensor& inputs,
                                       const ad::Tensor& targets, const RegressionConfig& cfg, Rng& rng) {
  require_cols(inputs, spec.sizes.front(), "fit_reward_regression inputs");
  require_cols(targets, 1, "fit_reward_regression targets");
  if (inputs.rows() != targets.rows() || inputs.rows() == 0) {
    throw std::invalid_argument("fit_reward_regression: inputs and targets need the same nonzero row count");
  }
  Adam adam(cfg.adam);
  RegressionResult res;
  const std::string prefix = spec.prefix + "/";
  std::vector<std::size_t> rows(std::min(cfg.batch, inputs.rows()));
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& r : rows) r = uniform_index(rng, inputs.rows());
    ad::Tape tape;
    ad::Var pred = nn::mlp(tape, params, spec, tape.constant(gather_rows(inputs, rows)));
    ad::Var loss = ad::mse_loss(tape.constant(gather_rows(targets, rows)), pred);
    res.losses.push_back(loss.value().item());
    ad::Gradients grads;
    for (auto& [name, g] : tape.backward(loss))
      if (name.starts_with(prefix)) grads.emplace(name, std::move(g));
    params = adam.step(params, grads);
  }
  res.params = std::move(params);
  return res;
}

double regression_mse(const ParamStore& params, const nn::MlpSpec& spec, const ad::Tensor& inputs,
                      const ad::Tensor& targets) {
  const ad::Tensor pred = run_mlp(params, spec, inputs);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - targets[i]) * (pred[i] - targets[i]);
  return total / static_cast<double>(pred.size());
}

nlohmann::json manifest_to_json(const BankManifest& m) {
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& [label, path] : m.sources) sources.push_back({{"label", label}, {"checkpoint", path}});
  return {{"encoder_hash", m.encoder_hash}, {"latent_dim", m.latent_dim}, {"hidden", m.hidden}, {"sources", sources}};
}

BankManifest manifest_from_json(const nlohmann::json& doc) {
  try {
    BankManifest m;
    m.encoder_hash = doc.at("encoder_hash").get<std::string>();
    m.latent_dim = doc.at("latent_dim").get<std::size_t>();
    m.hidden = doc.value("hidden", std::size_t{32});
    for (const auto& s : doc.at("sources")) {
      m.sources.emplace_back(s.at("label").get<std::string>(), s.at("checkpoint").get<std::string>());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed bank manifest: ") + e.what());
  }
}

FrozenRewardBank load_bank(const BankManifest& manifest, const UniversalEncoder& encoder,
                           const std::filesystem::path& base_dir) {
  if (manifest.encoder_hash != encoder.hash()) {
    throw ConfigError("bank manifest was built for encoder " + manifest.encoder_hash + ", loaded encoder is " +
                      encoder.hash());
  }
  if (manifest.latent_dim != encoder.latent_dim()) throw ConfigError("bank manifest latent_dim disagrees with encoder");
  std::vector<BankMember> members;
  for (const auto& [label, path] : manifest.sources) {
    const Checkpoint ckpt = load_checkpoint(base_dir / path);
    const std::string stamped = ckpt.meta.value("encoder_hash", "");
    if (stamped != encoder.hash()) {
      throw ConfigError("reward model '" + label + "' was trained against encoder " +
                        (stamped.empty() ? "<none>" : stamped) + ", expected " + encoder.hash());
    }
    members.push_back({label, ckpt.params.section("reward/")});
  }
  try {
    return FrozenRewardBank(manifest.latent_dim, manifest.hidden, std::move(members));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Checkpoint reward_model_checkpoint(const ParamStore& reward_params, const UniversalEncoder& encoder,
                                   const std::string& label, std::size_t hidden, std::uint64_t seed) {
  Checkpoint c;
  c.seed = seed;
  c.params = reward_params.section("reward/");
  c.meta = {{"kind", "reward_model"},
            {"label", label},
            {"encoder_hash", encoder.hash()},
            {"latent_dim", encoder.latent_dim()},
            {"hidden", hidden}};
  return c;
}

}  // namespace mbtl::meta
