// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run with --only N to execute a single criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mbtl/agent.hpp"
#include "mbtl/behavior.hpp"
#include "mbtl/checkpoint.hpp"
#include "mbtl/config.hpp"
#include "mbtl/envs.hpp"
#include "mbtl/latent_task.hpp"
#include "mbtl/mdp.hpp"
#include "mbtl/meta_model.hpp"
#include "mbtl/metrics.hpp"
#include "mbtl/trainer.hpp"
#include "mbtl/transfer.hpp"
#include "mbtl/world_model.hpp"
#include "support/gradcheck.hpp"
#include "support/lambda_oracle.hpp"
#include "support/ltc_oracle.hpp"
#include "support/mdp_oracle.hpp"

#ifndef MBTL_CLI_PATH
#error "MBTL_CLI_PATH must name the CLI binary"
#endif

namespace fs = std::filesystem;
using namespace mbtl;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (double x : xs) out += (out.empty() ? "" : ", ") + fmt("%.2f", x);
  return "[" + out + "]";
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

fs::path work_root() { return fs::temp_directory_path() / "mbtl_acceptance"; }

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = work_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- 1

Outcome mdp_oracle_suite() {
  Rng rng(4242);
  int unique = 0, policy_mismatch = 0, value_mismatch = 0;
  double worst_residual = 0.0, worst_value_gap = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t ns = 1 + uniform_index(rng, 4), na = 1 + uniform_index(rng, 3);
    const auto m = mdp::random_mdp(ns, na, 0.9, rng);
    const auto oracle = oracle::enumerate_policies(m);
    for (const auto& sol : {mdp::value_iteration(m), mdp::policy_iteration(m)}) {
      worst_residual = std::max(worst_residual, mdp::bellman_residual(m, sol.value));
      for (std::size_t s = 0; s < ns; ++s) {
        const double gap = std::abs(sol.value.values[s] - oracle.best_values[s]);
        worst_value_gap = std::max(worst_value_gap, gap);
        if (gap > 1e-6) ++value_mismatch;
      }
      if (oracle.margin > 1e-9 && sol.policy.action != oracle.best_policy) ++policy_mismatch;
    }
    if (oracle.margin > 1e-9) ++unique;
  }
  return {policy_mismatch == 0 && value_mismatch == 0 && worst_residual < 1e-6,
          std::to_string(unique) + "/100 unique optima, policy mismatches " + std::to_string(policy_mismatch) +
              ", max |V-V*| " + fmt("%.1e", worst_value_gap) + ", max residual " + fmt("%.1e", worst_residual)};
}

// ---------------------------------------------------------------- 2

Outcome q_learning_convergence() {
  const auto chain = oracle::chain_mdp(3, 0.9);
  const auto q_star = mdp::q_from_values(chain, mdp::value_iteration(chain, 1e-12).value);
  double worst = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    const auto q = mdp::q_learning(chain, mdp::QLearningConfig{.updates = 50'000}, rng);
    for (std::size_t i = 0; i < q.values.size(); ++i) worst = std::max(worst, std::abs(q.values[i] - q_star.values[i]));
  }
  return {worst < 0.01, "max |Q-Q*| over 3 seeds after 50k updates " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 3

using OpFn = std::function<Var(Tape&, const ParamStore&)>;

Var P(Tape& t, const ParamStore& p, const std::string& n) { return t.param(n, p.value(n)); }

double op_max_error(const ParamStore& p, const OpFn& op, Rng& rng) {
  Tape probe;
  const Tensor weights = random_tensor(op(probe, p).value().shape(), rng);
  auto loss = [&](const ParamStore& q, ad::Gradients* g) {
    Tape tape;
    Var l = ad::sum(ad::mul(op(tape, q), tape.constant(weights)));
    if (g) *g = tape.backward(l);
    return l.value().item();
  };
  ad::Gradients g;
  loss(p, &g);
  return oracle::check_gradients(p, [&](const ParamStore& q) { return loss(q, nullptr); }, g).max_rel_error;
}

std::vector<std::pair<std::string, OpFn>> primitive_ops() {
  return {
      {"matmul", [](Tape& t, const ParamStore& p) { return ad::matmul(P(t, p, "a"), P(t, p, "w")); }},
      {"add", [](Tape& t, const ParamStore& p) { return ad::add(P(t, p, "a"), P(t, p, "c")); }},
      {"sub", [](Tape& t, const ParamStore& p) { return ad::sub(P(t, p, "a"), P(t, p, "c")); }},
      {"mul", [](Tape& t, const ParamStore& p) { return ad::mul(P(t, p, "a"), P(t, p, "c")); }},
      {"add_row", [](Tape& t, const ParamStore& p) { return ad::add_row(P(t, p, "a"), P(t, p, "row")); }},
      {"scale", [](Tape& t, const ParamStore& p) { return ad::scale(P(t, p, "a"), 2.3); }},
      {"add_scalar", [](Tape& t, const ParamStore& p) { return ad::add_scalar(P(t, p, "a"), -0.4); }},
      {"relu", [](Tape& t, const ParamStore& p) { return ad::relu(P(t, p, "a")); }},
      {"tanh", [](Tape& t, const ParamStore& p) { return ad::tanh(P(t, p, "a")); }},
      {"sigmoid", [](Tape& t, const ParamStore& p) { return ad::sigmoid(P(t, p, "a")); }},
      {"exp", [](Tape& t, const ParamStore& p) { return ad::exp(P(t, p, "a")); }},
      {"square", [](Tape& t, const ParamStore& p) { return ad::square(P(t, p, "a")); }},
      {"clamp", [](Tape& t, const ParamStore& p) { return ad::clamp(P(t, p, "a"), -0.5, 0.5); }},
      {"concat", [](Tape& t, const ParamStore& p) { return ad::concat_cols({P(t, p, "c"), P(t, p, "a")}); }},
      {"slice", [](Tape& t, const ParamStore& p) { return ad::slice_cols(P(t, p, "a"), 1, 2); }},
      {"sum", [](Tape& t, const ParamStore& p) { return ad::sum(P(t, p, "a")); }},
      {"mean", [](Tape& t, const ParamStore& p) { return ad::mean(P(t, p, "a")); }},
      {"row_sum", [](Tape& t, const ParamStore& p) { return ad::row_sum(P(t, p, "a")); }},
      {"linear", [](Tape& t, const ParamStore& p) { return ad::linear(P(t, p, "a"), P(t, p, "w"), P(t, p, "bias")); }},
      {"mse", [](Tape& t, const ParamStore& p) { return ad::mse_loss(P(t, p, "a"), P(t, p, "c")); }},
      {"kl", [](Tape& t, const ParamStore& p) {
         return ad::kl_diag_gaussian(P(t, p, "a"), ad::scale(P(t, p, "c"), 0.5), P(t, p, "d"),
                                     ad::scale(P(t, p, "e"), 0.5));
       }},
      {"gaussian_sample", [](Tape& t, const ParamStore& p) {
         static thread_local Rng rng;
         rng.seed(31);
         return ad::gaussian_sample(P(t, p, "a"), P(t, p, "c"), ad::Noise{&rng, 1.0});
       }},
  };
}

double world_model_loss_error(std::uint64_t seed) {
  const WorldModelDims dims{.obs_dim = 3, .action_dim = 2, .deter = 3, .stoch = 2, .hidden = 4, .embed = 3};
  WorldModel wm(dims);
  ParamStore params;
  Rng init(seed);
  wm.init_params(params, init);
  for (const auto& name : params.names_with_prefix("wm/"))
    if (name.ends_with("/b"))
      for (double& v : params.mutable_value(name).data()) v = uniform(init, -0.5, 0.5);
  SequenceBatch batch;
  for (std::size_t t = 0; t < 3; ++t) {
    batch.obs.push_back(random_tensor({2, dims.obs_dim}, init));
    batch.prev_action.push_back(t == 0 ? Tensor({2, dims.action_dim}) : random_tensor({2, dims.action_dim}, init));
    batch.reward.push_back(t == 0 ? Tensor({2, 1}) : random_tensor({2, 1}, init));
    batch.reward_mask.push_back(Tensor({2, 1}, t == 0 ? 0.0 : 1.0));
  }
  auto loss = [&](const ParamStore& p, ad::Gradients* g) {
    Rng noise(seed + 500);
    Tape tape;
    Var l = wm.loss(tape, p, batch, {&noise});
    if (g) *g = tape.backward(l);
    return l.value().item();
  };
  ad::Gradients g;
  loss(params, &g);
  return oracle::check_gradients(params, [&](const ParamStore& p) { return loss(p, nullptr); }, g).max_rel_error;
}

double imagination_objective_error(std::uint64_t seed) {
  const WorldModel wm(WorldModelDims{.obs_dim = 3, .action_dim = 2, .deter = 3, .stoch = 2, .hidden = 5, .embed = 4});
  const behavior::ActorCriticDims ac{.feature_dim = 5, .action_dim = 2, .hidden = 5};
  ParamStore params;
  Rng init(seed);
  wm.init_params(params, init);
  behavior::init_actor(params, ac, init);
  behavior::init_value(params, ac, init);
  for (const auto& [name, entry] : params.entries())
    if (name.ends_with("/b"))
      for (double& v : params.mutable_value(name).data()) v = uniform(init, -0.5, 0.5);
  const Tensor obs = random_tensor({2, 3}, init);
  auto objective = [&](const ParamStore& p, ad::Gradients* g) {
    Rng rng(seed + 900);
    Tape tape;
    const LatentState s0 = wm.observe_step(tape, p, wm.initial_state(tape, 2), tape.constant(Tensor({2, 2})),
                                           tape.constant(obs), {&rng});
    auto traj = behavior::imagine_trajectory(tape, wm, p, ac, s0, 3, {&rng});
    if (g) {
      *g = behavior::actor_gradients(tape, traj, {});
      return 0.0;
    }
    const auto vals = behavior::lambda_returns(traj, behavior::kDefaultLambda, behavior::kDefaultGamma).value().values();
    return -std::accumulate(vals.begin(), vals.end(), 0.0) / 2.0;
  };
  ad::Gradients g;
  objective(params, &g);
  return oracle::check_gradients(
             params, [&](const ParamStore& p) { return objective(p, nullptr); }, g, 1e-5, 1e-6,
             [](const std::string& n) { return n.starts_with("actor/"); })
      .max_rel_error;
}

Outcome gradient_integrity() {
  const auto ops = primitive_ops();
  double worst_op = 0.0, worst_wm = 0.0, worst_imag = 0.0;
  std::string worst_name;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(7000 + seed);
    auto away = [&](std::vector<std::size_t> shape) {
      Tensor t = random_tensor(std::move(shape), rng);
      for (double& v : t.data())
        if (std::abs(v) < 0.05 || std::abs(std::abs(v) - 0.5) < 0.05) v += 0.11;
      return t;
    };
    ParamStore p;
    for (const char* n : {"a", "c", "d", "e"}) p.add(n, away({3, 4}), ComponentTag::encoder);
    p.add("w", away({4, 2}), ComponentTag::encoder);
    p.add("row", away({4}), ComponentTag::encoder);
    p.add("bias", away({2}), ComponentTag::encoder);
    for (const auto& [name, op] : ops) {
      const double err = op_max_error(p, op, rng);
      if (err > worst_op) {
        worst_op = err;
        worst_name = name;
      }
    }
    worst_wm = std::max(worst_wm, world_model_loss_error(seed + 1));
    worst_imag = std::max(worst_imag, imagination_objective_error(seed + 1));
  }
  const bool pass = worst_op < 1e-3 && worst_wm < 1e-3 && worst_imag < 1e-3;
  return {pass, std::to_string(ops.size()) + " ops max rel " + fmt("%.1e", worst_op) + " (" + worst_name +
                    "), wm loss " + fmt("%.1e", worst_wm) + ", 3-step imagination " + fmt("%.1e", worst_imag)};
}

// ---------------------------------------------------------------- 4

Outcome lambda_identities() {
  Rng rng(99);
  int identity_failures = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t H = 1 + uniform_index(rng, 20);
    std::vector<double> r(H), v(H + 1);
    for (double& x : r) x = uniform(rng, -5.0, 5.0);
    for (double& x : v) x = uniform(rng, -5.0, 5.0);
    const double gamma = uniform(rng, 0.0, 1.0), lambda = uniform(rng, 0.0, 1.0);
    if (behavior::v_lambda(r, v, 1.0, gamma) != behavior::v_n_k(r, v, H, gamma)) ++identity_failures;
    if (behavior::v_lambda(r, v, 0.0, gamma) != behavior::v_n_k(r, v, 1, gamma)) ++identity_failures;
    const auto est = behavior::v_lambda(r, v, lambda, gamma);
    for (std::size_t t = 0; t <= H; ++t) worst = std::max(worst, std::abs(est[t] - oracle::lambda_return(r, v, t, lambda, gamma)));
  }
  return {identity_failures == 0 && worst <= 1e-12,
          "endpoint identity failures " + std::to_string(identity_failures) + "/1000, max oracle gap " +
              fmt("%.1e", worst) + " over 500 trajectories"};
}

// ---------------------------------------------------------------- 5

AgentDims small_agent() {
  return AgentDims{.obs_dim = 4, .action_dim = 2, .deter = 5, .stoch = 3, .hidden = 6, .embed = 5, .ac_hidden = 6};
}

ParamStore perturbed_agent(std::uint64_t seed) {
  Rng rng(seed);
  ParamStore p = init_agent(small_agent(), rng);
  for (const auto& [name, entry] : p.entries())
    for (double& v : p.mutable_value(name).data()) v += uniform(rng, -0.3, 0.3);
  return p;
}

Outcome ftl_algebra() {
  const ParamStore source = perturbed_agent(1), other_source = perturbed_agent(2), fresh = perturbed_agent(3);
  std::vector<std::string> problems;

  const ParamStore zero = transfer::apply_transfer(source, fresh, transfer::uniform_map(transfer::TransferMode::fractional(0.0)));
  if (!(zero == fresh)) problems.push_back("omega=0 changed fresh init");

  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double omega = uniform(rng, 0.0, 1.0);
    const ParamStore out = transfer::apply_transfer(source, fresh, transfer::uniform_map(transfer::TransferMode::fractional(omega)));
    for (const auto& [name, entry] : out.entries())
      for (std::size_t i = 0; i < entry.value.size(); ++i)
        worst = std::max(worst, std::abs(entry.value[i] - (fresh.value(name)[i] + omega * source.value(name)[i])));
  }
  if (worst > 1e-15) problems.push_back("fractional rule off by " + fmt("%.1e", worst));

  // expected placement per tag
  enum class Want { source, fractional, fresh };
  const std::map<ComponentTag, Want> expected = {
      {ComponentTag::encoder, Want::source},          {ComponentTag::decoder, Want::source},
      {ComponentTag::transition, Want::source},       {ComponentTag::reward_hidden, Want::source},
      {ComponentTag::value_hidden, Want::source},     {ComponentTag::actor_hidden, Want::source},
      {ComponentTag::reward_last, Want::fractional},  {ComponentTag::value_last, Want::fractional},
      {ComponentTag::actor_last, Want::fresh},        {ComponentTag::action_input, Want::fresh},
  };
  const double omega = 0.2;
  const ParamStore out = transfer::apply_transfer(source, fresh, transfer::default_dreamer_map(omega));
  const ParamStore out_other = transfer::apply_transfer(other_source, fresh, transfer::default_dreamer_map(omega));
  std::set<ComponentTag> seen;
  for (const auto& [name, entry] : out.entries()) {
    seen.insert(entry.tag);
    const Tensor& got = entry.value;
    bool ok = true;
    switch (expected.at(entry.tag)) {
      case Want::source:
        ok = got == source.value(name) && out_other.value(name) == other_source.value(name);
        break;
      case Want::fractional:
        for (std::size_t i = 0; i < got.size(); ++i)
          ok = ok && got[i] == fresh.value(name)[i] + omega * source.value(name)[i];
        ok = ok && !(got == out_other.value(name));
        break;
      case Want::fresh:
        ok = got == fresh.value(name) && out_other.value(name) == fresh.value(name);
        break;
    }
    if (!ok) problems.push_back(name + " (" + std::string(to_string(entry.tag)) + ") misplaced");
  }
  if (seen.size() != kAllComponentTags.size()) problems.push_back("agent does not cover every tag");

  std::string detail = "omega=0 bit-preserving, max fractional gap " + fmt("%.1e", worst) + ", " +
                       std::to_string(seen.size()) + " tags placed over " + std::to_string(out.size()) + " arrays";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// ---------------------------------------------------------------- 6

Outcome padding_invariance() {
  Rng rng(61);
  std::size_t checked = 0, mismatches = 0;
  const std::vector<std::pair<std::string, std::size_t>> cases = {
      {"pointmass_a", 3}, {"pendulum", 3}, {"pointmass3_a", 5}, {"double_pendulum", 4}, {"gridworld", 6}};
  while (checked < 1000) {
    for (const auto& [task, width] : cases) {
      auto plain = envs::make_env(task);
      auto padded = envs::pad_action_space(envs::make_env(task), width);
      const std::uint64_t reset_seed = rng();
      Rng r1(reset_seed), r2(reset_seed);
      if (plain->reset(r1) != padded->reset(r2)) ++mismatches;
      for (int t = 0; t < 40 && !plain->done(); ++t) {
        std::vector<double> wide(width);
        for (double& a : wide) a = uniform(rng, -1.5, 1.5);
        const std::size_t native = plain->spec().action_dim;
        const auto a = plain->step(std::vector<double>(wide.begin(), wide.begin() + static_cast<long>(native)));
        const auto b = padded->step(wide);
        if (a.obs != b.obs || a.reward != b.reward || a.done != b.done) ++mismatches;
        ++checked;
      }
    }
  }
  return {mismatches == 0, std::to_string(checked) + " padded steps, " + std::to_string(mismatches) + " mismatches"};
}

// ---------------------------------------------------------------- 7

Outcome ltc_exactness() {
  Rng rng(71);
  constexpr std::size_t dim = 4;
  auto cluster_point = [&](const std::vector<double>& center) {
    std::vector<double> p(dim);
    for (std::size_t j = 0; j < dim; ++j) p[j] = center[j] + uniform(rng, -1.0, 1.0);
    return p;
  };
  const std::vector<std::vector<double>> known = {{0, 0, 0, 0}, {10, 0, 0, 0}, {0, 10, 0, 0}, {0, 0, 10, 0}};
  const std::vector<std::vector<double>> novel = {{0, 0, 0, 10}, {10, 10, 0, 0}, {-10, 0, 0, 0}};
  std::vector<std::vector<std::vector<double>>> samples(known.size());
  for (std::size_t c = 0; c < known.size(); ++c)
    for (int i = 0; i < 100; ++i) samples[c].push_back(cluster_point(known[c]));

  double gap = 1e300;
  for (std::size_t a = 0; a < known.size(); ++a)
    for (std::size_t b = a + 1; b < known.size(); ++b)
      for (const auto& p : samples[a])
        for (const auto& q : samples[b]) gap = std::min(gap, ltc::manhattan(p, q));
  const double xi = gap / 2.0;
  const ltc::LtcModel model = ltc::fit(samples, {"c0", "c1", "c2", "c3"}, 5, xi);

  std::size_t scan_mismatch = 0;
  for (int q = 0; q < 10'000; ++q) {
    std::vector<double> s(dim);
    for (double& x : s) x = uniform(rng, -4.0, 14.0);
    // every fourth query is drawn inside a known cluster
    if (q % 4 == 0) s = cluster_point(known[uniform_index(rng, known.size())]);
    if (ltc::classify(model, s) != oracle::brute_force_classify(model.points, model.labels, model.k, model.xi, s))
      ++scan_mismatch;
  }

  std::size_t known_right = 0, known_total = 0, novel_right = 0, novel_total = 0;
  for (std::size_t c = 0; c < known.size(); ++c)
    for (int i = 0; i < 500; ++i, ++known_total)
      if (ltc::classify(model, cluster_point(known[c])) == ltc::Verdict(c)) ++known_right;
  for (const auto& center : novel)
    for (int i = 0; i < 500; ++i, ++novel_total)
      if (!ltc::classify(model, cluster_point(center))) ++novel_right;

  const bool pass = scan_mismatch == 0 && known_right == known_total && novel_right == novel_total;
  return {pass, "brute-force mismatches " + std::to_string(scan_mismatch) + "/10000 over " +
                    std::to_string(model.points.size()) + " points, xi " + fmt("%.2f", xi) + ", known " +
                    std::to_string(known_right) + "/" + std::to_string(known_total) + ", novel " +
                    std::to_string(novel_right) + "/" + std::to_string(novel_total)};
}

// ---------------------------------------------------------------- 8

RunConfig tiny_run(const std::string& task) {
  RunConfig c;
  c.run_id = "tiny";
  c.tasks = {task};
  c.budget = 400;
  c.eval_interval = 200;
  c.model = AgentDims{.deter = 6, .stoch = 3, .hidden = 12, .embed = 8, .ac_hidden = 12};
  c.train.updates_per_collect = 5;
  c.train.batch = 4;
  c.train.seq_len = 6;
  c.train.horizon = 5;
  c.train.imagine_starts = 8;
  c.train.target_every = 3;
  return c;
}

bool section_equal(const ParamStore& a, const ParamStore& b, const std::string& prefix) {
  return a.section(prefix) == b.section(prefix);
}

Outcome freeze_contracts() {
  std::vector<std::string> problems;

  // Meta-model training over a frozen encoder and reward bank.
  {
    Rng rng(81);
    ParamStore agent = init_agent(AgentDims{.obs_dim = 4, .action_dim = 2, .embed = 6}, rng);
    const meta::UniversalEncoder encoder = meta::UniversalEncoder::from_params(agent);
    const ParamStore encoder_before = encoder.params();
    const std::string hash_before = encoder.hash();
    std::vector<meta::BankMember> members;
    for (const std::string task : {"pointmass_a", "pointmass_a_prime"}) {
      auto env = envs::make_env(task);
      const auto data = meta::collect_reward_dataset(*env, encoder, 3, rng);
      ParamStore p;
      const auto spec = meta::reward_model_spec("reward", encoder.latent_dim(), 16);
      nn::add_mlp(p, spec, rng);
      members.push_back({task, meta::fit_reward_regression(p, spec, data.latent, data.reward, {.steps = 100}, rng).params});
    }
    const std::vector<meta::BankMember> bank_before = members;
    const meta::FrozenRewardBank bank(encoder.latent_dim(), 16, std::move(members));
    auto target = envs::make_env("pointmass_a_dprime");
    const auto data = meta::collect_reward_dataset(*target, encoder, 3, rng);
    const Tensor bank_out_before = bank.predict(data.latent);
    const Tensor embed_before = encoder.embed(Tensor::matrix(1, 4, {0.1, -0.2, 0.3, 0.05}));

    const meta::MetaDims dims{.latent_dim = encoder.latent_dim(), .bank_size = bank.size(), .hidden = 16};
    ParamStore p = encoder.params();
    meta::init_meta_model(p, dims, rng);
    const auto fit = meta::fit_reward_regression(p, meta::meta_model_spec(dims), meta::meta_input(data.latent, bank),
                                                 data.reward, {.steps = 200}, rng);
    if (!(fit.params.section("wm/enc/") == encoder_before)) problems.push_back("encoder entries moved in meta fit");
    if (fit.params.section("meta/") == p.section("meta/")) problems.push_back("meta model did not train");
    if (!(encoder.params() == encoder_before) || encoder.hash() != hash_before ||
        !(encoder.embed(Tensor::matrix(1, 4, {0.1, -0.2, 0.3, 0.05})) == embed_before))
      problems.push_back("encoder changed");
    for (std::size_t i = 0; i < bank_before.size(); ++i)
      if (!(bank.members()[i].params == bank_before[i].params)) problems.push_back("bank member changed");
    if (!(bank.predict(data.latent) == bank_out_before)) problems.push_back("bank predictions changed");
  }

  // FTL target training with frozen sections.
  const fs::path root = fresh_dir("freeze");
  RunConfig cfg = tiny_run("pointmass_a_dprime");
  const EnvList envs = make_task_envs(cfg.tasks);
  const AgentDims dims = agent_dims_for(cfg, envs);
  {
    Rng rng(82);
    ParamStore src = init_agent(dims, rng);
    for (const auto& [name, entry] : src.entries())
      for (double& v : src.mutable_value(name).data()) v += uniform(rng, -0.1, 0.1);
    save_checkpoint(root / "source.json", Checkpoint{82, src, {}});
  }
  const ParamStore source = load_checkpoint(root / "source.json").params;
  cfg.transfer.source = (root / "source.json").string();

  for (const std::string mode : {"default", "full"}) {
    RunConfig c = cfg;
    c.transfer.mode = mode;
    c.freeze = {"wm/", "value/"};
    const ParamStore start = initial_params(c, dims, 5);
    Trainer t(c, 5, root / ("ftl_" + mode));
    t.run();
    const ParamStore end = load_checkpoint(root / ("ftl_" + mode) / "final.json").params;
    for (const auto& prefix : c.freeze)
      if (!section_equal(start, end, prefix)) problems.push_back(mode + ": frozen " + prefix + " moved");
    if (section_equal(start, end, "actor/")) problems.push_back(mode + ": actor did not train");
    if (mode == "full" && !(start == source)) problems.push_back("full transfer start differs from source");
    for (const auto& [name, entry] : end.entries()) {
      if (!name.starts_with("wm/") && !name.starts_with("value/")) continue;
      const auto tag = entry.tag;
      const bool copied = tag != ComponentTag::reward_last && tag != ComponentTag::value_last &&
                          tag != ComponentTag::actor_last && tag != ComponentTag::action_input;
      if ((mode == "full" || copied) && !(entry.value == source.value(name)))
        problems.push_back(mode + ": frozen " + name + " differs from source");
    }
  }

  // Pre-update snapshot of a full transfer equals the source.
  {
    RunConfig c = cfg;
    c.transfer.mode = "full";
    c.budget = 0;
    Trainer t(c, 6, root / "full_zero");
    t.run();
    if (!(load_checkpoint(root / "full_zero" / "final.json").params == source))
      problems.push_back("full transfer snapshot differs from source");
  }

  std::string detail = "meta fit: encoder and bank bit-identical; FTL default/full with wm/ and value/ frozen";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// ---------------------------------------------------------------- 9, 10

RunConfig smoke_run(std::vector<std::string> tasks, long budget, long eval_interval) {
  RunConfig c;
  c.tasks = std::move(tasks);
  c.budget = budget;
  c.eval_interval = eval_interval;
  c.eval_episodes = 5;
  c.initial_episodes = 5;
  c.train.updates_per_collect = 50;
  c.train.batch = 8;
  c.train.imagine_starts = 32;
  c.train.wm_lr = 1e-3;
  c.train.actor_lr = 1e-4;
  c.train.value_lr = 3e-4;
  return c;
}

Curve run_curve(const RunConfig& cfg, std::uint64_t seed, const fs::path& dir) {
  Trainer t(cfg, seed, dir);
  t.run();
  auto curves = curves_for_task(read_metrics(dir / "metrics.jsonl"));
  return curves.at(0);
}

const std::vector<std::uint64_t> kSmokeSeeds = {1, 2, 3};

Outcome identity_transfer() {
  const fs::path root = fresh_dir("identity");
  std::vector<double> source_final, jumpstart;
  for (std::uint64_t seed : kSmokeSeeds) {
    RunConfig src = smoke_run({"pointmass_a"}, 20'000, 1000);
    src.run_id = "source";
    const fs::path src_dir = root / ("source_" + std::to_string(seed));
    source_final.push_back(curve_final(run_curve(src, seed, src_dir), 0.1));

    RunConfig tgt = smoke_run({"pointmass_a"}, 1000, 200);
    tgt.run_id = "identity";
    tgt.transfer.source = (src_dir / "final.json").string();
    tgt.transfer.mode = "identity";
    const Curve c = run_curve(tgt, seed, root / ("target_" + std::to_string(seed)));
    jumpstart.push_back(std::accumulate(c.returns.begin(), c.returns.begin() + 5, 0.0) / 5.0);
  }
  const double src_mean = mean(source_final), js_mean = mean(jumpstart);
  return {js_mean >= 0.8 * src_mean, "source final " + join(source_final) + " mean " + fmt("%.2f", src_mean) +
                                         ", target first-5 " + join(jumpstart) + " mean " + fmt("%.2f", js_mean) +
                                         " (need >= " + fmt("%.2f", 0.8 * src_mean) + ")"};
}

Outcome directional_ftl() {
  const fs::path root = fresh_dir("directional");
  std::vector<Curve> transfer_curves, scratch_curves;
  for (std::uint64_t seed : kSmokeSeeds) {
    RunConfig src = smoke_run({"pointmass_a", "pointmass_a_prime"}, 20'000, 2000);
    src.run_id = "source";
    const fs::path src_dir = root / ("source_" + std::to_string(seed));
    run_curve(src, seed, src_dir);

    RunConfig tgt = smoke_run({"pointmass_a_dprime"}, 10'000, 500);
    tgt.run_id = "scratch";
    scratch_curves.push_back(run_curve(tgt, seed, root / ("scratch_" + std::to_string(seed))));
    tgt.run_id = "ftl";
    tgt.transfer.source = (src_dir / "final.json").string();
    tgt.transfer.mode = "default";
    tgt.transfer.omega = 0.2;
    transfer_curves.push_back(run_curve(tgt, seed, root / ("ftl_" + std::to_string(seed))));
  }
  const TlMetrics m = tl_metrics(transfer_curves, scratch_curves);
  std::vector<double> per_t, per_s;
  for (const auto& c : transfer_curves) per_t.push_back(curve_overall(c));
  for (const auto& c : scratch_curves) per_s.push_back(curve_overall(c));
  return {m.transfer_overall >= m.baseline_overall - m.pooled_sd,
          "FTL overall " + join(per_t) + " mean " + fmt("%.2f", m.transfer_overall) + ", scratch " + join(per_s) +
              " mean " + fmt("%.2f", m.baseline_overall) + ", pooled sd " + fmt("%.2f", m.pooled_sd) +
              ", jumpstart " + fmt("%.2f", m.jumpstart) + ", verdict " + to_string(m.verdict)};
}

// ---------------------------------------------------------------- 11

Outcome cli_reproducibility() {
  const fs::path root = fresh_dir("repro");
  RunConfig cfg = tiny_run("pointmass_a");
  cfg.tasks = {"pointmass_a", "pointmass_a_prime"};
  cfg.run_id = "repro";
  cfg.seeds = {3, 4};
  write_json_file(root / "config.json", config_to_json(cfg));
  std::vector<std::string> logs;
  for (const std::string out : {"a", "b"}) {
    const std::string cmd = std::string("\"") + MBTL_CLI_PATH + "\" train-source -c \"" +
                            (root / "config.json").string() + "\" -o \"" + (root / out).string() + "\" > \"" +
                            (root / (out + ".log")).string() + "\" 2>&1";
    if (const int rc = std::system(cmd.c_str()); rc != 0)
      return {false, "CLI exited with status " + std::to_string(rc) + ": " + slurp(root / (out + ".log"))};
    logs.push_back(slurp(root / out / "repro" / "metrics.jsonl"));
  }
  const std::size_t lines = static_cast<std::size_t>(std::count(logs[0].begin(), logs[0].end(), '\n'));
  return {!logs[0].empty() && logs[0] == logs[1],
          "train-source twice, 2 seeds x 2 tasks: " + std::to_string(lines) + " records, " +
              std::to_string(logs[0].size()) + " bytes, " + (logs[0] == logs[1] ? "identical" : "DIFFERENT")};
}

struct Criterion {
  int id;
  std::string name;
  double limit_s;  // 0 means no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criterion numbers to run");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "MDP oracle suite", 10, mdp_oracle_suite},
      {2, "Q-learning convergence", 5, q_learning_convergence},
      {3, "Gradient integrity", 60, gradient_integrity},
      {4, "Lambda-return identities and oracle", 5, lambda_identities},
      {5, "FTL algebra", 5, ftl_algebra},
      {6, "Padding invariance", 5, padding_invariance},
      {7, "LTC exactness", 10, ltc_exactness},
      {8, "Freeze contracts", 0, freeze_contracts},
      {9, "Identity-transfer smoke test", 600, identity_transfer},
      {10, "Directional FTL smoke test", 1800, directional_ftl},
      {11, "CLI reproducibility", 0, cli_reproducibility},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string timing = fmt("%.1f s", secs);
    if (c.limit_s > 0) {
      timing += fmt(" of %.0f s", c.limit_s);
      if (secs >= c.limit_s) {
        out.pass = false;
        out.detail += "; over the runtime limit";
      }
    }
    std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.name << " (" << timing << "): " << out.detail
              << std::endl;
    ++ran;
    if (!out.pass) ++failed;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
