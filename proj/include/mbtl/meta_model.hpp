#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbtl/checkpoint.hpp"
#include "mbtl/envs.hpp"
#include "mbtl/nn.hpp"
#include "mbtl/optim.hpp"
#include "mbtl/param_store.hpp"

namespace mbtl::meta {

std::string format_hash(std::uint64_t hash);

/// Frozen observation encoder shared by every agent in a transfer setup. The
/// embedding it produces is the universal latent space of dimension M.
class UniversalEncoder {
 public:
  /// Takes the `wm/enc/` section of params.
  static UniversalEncoder from_params(const ParamStore& params);

  std::size_t obs_dim() const { return spec_.sizes.front(); }
  std::size_t latent_dim() const { return spec_.sizes.back(); }
  const std::string& hash() const { return hash_; }
  const ParamStore& params() const { return params_; }

  /// [n×obs_dim] -> [n×M]. Computed off-tape, so no gradient can reach it.
  ad::Tensor embed(const ad::Tensor& obs) const;

 private:
  ParamStore params_;
  nn::MlpSpec spec_;
  std::string hash_;
};

/// Throws ConfigError when the checkpoint has no encoder section.
UniversalEncoder load_universal_encoder(const Checkpoint& ckpt);

/// Reward MLP `<prefix>/l0..l2` over `input_dim` inputs.
nn::MlpSpec reward_model_spec(const std::string& prefix, std::size_t input_dim, std::size_t hidden);

struct BankMember {
  std::string label;
  ParamStore params;  // `reward/` section
};

/// Stored source reward models G_1..G_N over the universal latent. Members
/// are immutable once the bank is built.
class FrozenRewardBank {
 public:
  FrozenRewardBank(std::size_t latent_dim, std::size_t hidden, std::vector<BankMember> members);

  std::size_t size() const { return members_.size(); }
  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t hidden() const { return hidden_; }
  const std::vector<BankMember>& members() const { return members_; }
  std::vector<std::string> labels() const;

  /// [n×M] -> [n×N], column i from member i.
  ad::Tensor predict(const ad::Tensor& latent) const;

 private:
  std::size_t latent_dim_;
  std::size_t hidden_;
  std::vector<BankMember> members_;
};

/// [G_1(s), ..., G_N(s), s] row by row: [n × (N+M)].
ad::Tensor meta_input(const ad::Tensor& latent, const FrozenRewardBank& bank);

struct MetaDims {
  std::size_t latent_dim = 0;
  std::size_t bank_size = 0;
  std::size_t hidden = 32;

  std::size_t input_dim() const { return latent_dim + bank_size; }
};

/// Registers `meta/l0..l2` tagged reward_hidden / reward_last.
void init_meta_model(ParamStore& params, const MetaDims& dims, Rng& rng, bool zero_last = false);
nn::MlpSpec meta_model_spec(const MetaDims& dims);
/// [n×1] reward prediction from a meta_input batch.
ad::Var meta_predict(ad::Tape& tape, const ParamStore& params, const MetaDims& dims, ad::Var input);
ad::Tensor meta_predict(const ParamStore& params, const MetaDims& dims, const ad::Tensor& latent,
                        const FrozenRewardBank& bank);

/// Latent of the arriving observation and the reward received on arrival.
struct RewardDataset {
  ad::Tensor latent;  // [n×M]
  ad::Tensor reward;  // [n×1]

  std::size_t size() const { return reward.rows(); }
};

/// Uniform random actions; one row per transition.
RewardDataset collect_reward_dataset(envs::Env& env, const UniversalEncoder& encoder, std::size_t episodes, Rng& rng);

struct RegressionConfig {
  std::size_t steps = 500;
  std::size_t batch = 64;
  AdamConfig adam{.alpha = 3e-3};
};

struct RegressionResult {
  ParamStore params;
  std::vector<double> losses;  // minibatch loss before each step
};

/// Fits the MLP described by spec (entries under spec.prefix) to targets with
/// Adam on ½ squared error. Other entries of params are carried unchanged.
RegressionResult fit_reward_regression(ParamStore params, const nn::MlpSpec& spec, const ad::Tensor& inputs,
                                       const ad::Tensor& targets, const RegressionConfig& cfg, Rng& rng);
/// Plain mean squared error over all rows.
double regression_mse(const ParamStore& params, const nn::MlpSpec& spec, const ad::Tensor& inputs,
                      const ad::Tensor& targets);

/// Source list for a bank: {"encoder_hash", "latent_dim", "hidden",
/// "sources": [{"label", "checkpoint"}]}. Checkpoint paths resolve relative to
/// the manifest's directory.
struct BankManifest {
  std::string encoder_hash;
  std::size_t latent_dim = 0;
  std::size_t hidden = 32;
  std::vector<std::pair<std::string, std::string>> sources;
};

nlohmann::json manifest_to_json(const BankManifest& m);
BankManifest manifest_from_json(const nlohmann::json& doc);

/// Loads every source reward model. Throws ConfigError when any checkpoint
/// was built against a different encoder than `encoder`.
FrozenRewardBank load_bank(const BankManifest& manifest, const UniversalEncoder& encoder,
                           const std::filesystem::path& base_dir);

/// Checkpoint for a reward model over the universal latent, stamped with the
/// encoder hash.
Checkpoint reward_model_checkpoint(const ParamStore& reward_params, const UniversalEncoder& encoder,
                                   const std::string& label, std::size_t hidden, std::uint64_t seed);

}  // namespace mbtl::meta
