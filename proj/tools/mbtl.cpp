#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mbtl/checkpoint.hpp"
#include "mbtl/config.hpp"
#include "mbtl/errors.hpp"
#include "mbtl/latent_task.hpp"
#include "mbtl/mdp.hpp"
#include "mbtl/meta_model.hpp"
#include "mbtl/metrics.hpp"
#include "mbtl/nn.hpp"
#include "mbtl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mbtl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  std::ofstream f(out);
  if (!f) throw IoError("cannot open '" + out + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + out + "'");
}

// ---- solve-mdp

struct SolveMdpArgs {
  std::string mdp_file;
  std::size_t gridworld = 0;
  double gamma = 0.9;
  std::string method = "vi";
  long steps = 50000;
  std::uint64_t seed = 1;
  std::string out;
};

void solve_mdp(const SolveMdpArgs& a) {
  mdp::TabularMdp m;
  if (!a.mdp_file.empty()) {
    try {
      m = mdp::mdp_from_json(read_json_file(a.mdp_file));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (a.gridworld > 0) {
    m = mdp::gridworld_mdp(a.gridworld, a.gamma);
  } else {
    throw ConfigError("solve-mdp needs --mdp or --gridworld");
  }
  json doc;
  doc["method"] = a.method;
  if (a.method == "vi" || a.method == "pi") {
    const mdp::Solution s = a.method == "vi" ? mdp::value_iteration(m) : mdp::policy_iteration(m);
    doc["values"] = s.value.values;
    doc["policy"] = s.policy.action;
    doc["bellman_residual"] = mdp::bellman_residual(m, s.value);
  } else if (a.method == "q") {
    mdp::QLearningConfig cfg;
    cfg.updates = a.steps;
    Rng rng(a.seed);
    const mdp::QTable q = mdp::q_learning(m, cfg, rng);
    std::vector<std::size_t> policy;
    for (std::size_t s = 0; s < q.n_states; ++s) policy.push_back(mdp::argmax(q.row(s)));
    doc["q"] = q.values;
    doc["policy"] = policy;
  } else {
    throw ConfigError("unknown method '" + a.method + "' (vi, pi or q)");
  }
  emit(a.out, doc.dump(1) + "\n");
}

// ---- training

struct TrainArgs {
  std::string config;
  std::string out = "runs";
  std::vector<std::uint64_t> seeds;
  long budget = -1;
  std::vector<std::string> tasks;
  std::string run_id;
  std::string source;
  std::string mode;
  double omega = -1.0;
  std::vector<std::string> freeze;
  bool resume = false;
};

RunConfig resolve_config(const TrainArgs& a, bool target) {
  RunConfig c = a.config.empty() ? RunConfig{} : load_config(a.config);
  if (!a.seeds.empty()) c.seeds = a.seeds;
  if (a.budget >= 0) c.budget = a.budget;
  if (!a.tasks.empty()) c.tasks = a.tasks;
  if (!a.run_id.empty()) c.run_id = a.run_id;
  if (!a.source.empty()) c.transfer.source = a.source;
  if (!a.mode.empty()) c.transfer.mode = a.mode;
  if (a.omega >= 0.0) c.transfer.omega = a.omega;
  if (!a.freeze.empty()) c.freeze = a.freeze;
  if (!target) c.transfer.source.clear();
  if (target && c.transfer.source.empty()) throw ConfigError("train-target needs a source checkpoint");
  c.validate();
  return c;
}

fs::path seed_dir(const fs::path& out, const RunConfig& c, std::uint64_t seed) {
  return out / c.run_id / ("seed_" + std::to_string(seed));
}

void train(const TrainArgs& a, bool target) {
  const RunConfig c = resolve_config(a, target);
  const fs::path root = fs::path(a.out) / c.run_id;
  fs::create_directories(root);
  write_json_file(root / "config.json", config_to_json(c));
  std::string combined;
  for (std::uint64_t seed : c.seeds) {
    const fs::path dir = seed_dir(a.out, c, seed);
    if (a.resume && fs::exists(dir / "checkpoint.json")) {
      Trainer t = Trainer::resume(dir);
      t.run();
    } else {
      Trainer t(c, seed, dir);
      t.run();
    }
    std::ifstream in(dir / "metrics.jsonl");
    std::stringstream ss;
    ss << in.rdbuf();
    combined += ss.str();
    std::cout << "seed " << seed << ": " << (dir / "final.json").string() << "\n";
  }
  emit((root / "metrics.jsonl").string(), combined);
  std::cout << "metrics: " << (root / "metrics.jsonl").string() << "\n";
}

// ---- transfer

struct TransferArgs {
  std::string source;
  std::string task;
  std::string mode = "default";
  double omega = 0.2;
  std::string map_file;
  std::string fresh;
  std::uint64_t seed = 1;
  std::string out;
};

void make_transfer(const TransferArgs& a) {
  const Checkpoint src = load_checkpoint(a.source);
  if (!a.fresh.empty()) {
    Checkpoint out = load_checkpoint(a.fresh);
    const TransferConfig tc{a.source, a.mode, a.map_file, a.omega};
    try {
      out.params = transfer::apply_transfer(src.params, out.params, transfer_map_for(tc));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("source checkpoint does not fit the fresh agent: ") + e.what());
    }
    out.meta["transfer"] = {{"source", a.source}, {"fresh", a.fresh}, {"mode", a.mode}, {"omega", a.omega}};
    save_checkpoint(a.out, out);
    std::cout << "wrote " << a.out << "\n";
    return;
  }
  if (a.task.empty()) throw ConfigError("transfer needs --task or --fresh");
  if (!src.meta.contains("dims")) throw ConfigError("source checkpoint carries no agent dims");
  RunConfig c;
  c.tasks = {a.task};
  c.model = dims_from_json(src.meta["dims"]);
  c.transfer = {a.source, a.mode, a.map_file, a.omega};
  c.validate();
  const EnvList envs = make_task_envs(c.tasks);
  const AgentDims dims = agent_dims_for(c, envs);
  Checkpoint out;
  out.seed = a.seed;
  out.params = initial_params(c, dims, a.seed);
  out.meta = {{"kind", "agent"},
              {"dims", dims_to_json(dims)},
              {"tasks", c.tasks},
              {"transfer", {{"source", a.source}, {"mode", a.mode}, {"omega", a.omega}}}};
  save_checkpoint(a.out, out);
  std::cout << "wrote " << a.out << "\n";
}

// ---- meta model

struct MetaArgs {
  std::string encoder;
  std::string task;
  std::string bank;
  std::size_t episodes = 10;
  std::size_t steps = 500;
  std::size_t hidden = 32;
  std::uint64_t seed = 1;
  std::string out;
};

void train_meta(const MetaArgs& a) {
  const meta::UniversalEncoder enc = meta::load_universal_encoder(load_checkpoint(a.encoder));
  auto env = envs::make_env(a.task);
  if (env->spec().obs_dim != enc.obs_dim()) throw ConfigError("task observations do not fit the encoder");
  Rng rng(a.seed);
  const meta::RewardDataset data = meta::collect_reward_dataset(*env, enc, a.episodes, rng);
  meta::RegressionConfig rc;
  rc.steps = a.steps;
  json report;
  if (a.bank.empty()) {
    ParamStore p;
    const nn::MlpSpec spec = meta::reward_model_spec("reward", enc.latent_dim(), a.hidden);
    nn::add_mlp(p, spec, rng);
    const auto fit = meta::fit_reward_regression(std::move(p), spec, data.latent, data.reward, rc, rng);
    save_checkpoint(a.out, meta::reward_model_checkpoint(fit.params, enc, a.task, a.hidden, a.seed));
    report = {{"kind", "reward_model"}, {"mse", meta::regression_mse(fit.params, spec, data.latent, data.reward)}};
  } else {
    const meta::BankManifest manifest = meta::manifest_from_json(read_json_file(a.bank));
    const meta::FrozenRewardBank bank = meta::load_bank(manifest, enc, fs::path(a.bank).parent_path());
    const meta::MetaDims dims{enc.latent_dim(), bank.size(), a.hidden};
    ParamStore p;
    meta::init_meta_model(p, dims, rng);
    const ad::Tensor inputs = meta::meta_input(data.latent, bank);
    const auto fit = meta::fit_reward_regression(std::move(p), meta::meta_model_spec(dims), inputs, data.reward, rc, rng);
    Checkpoint ck;
    ck.seed = a.seed;
    ck.params = fit.params;
    ck.meta = {{"kind", "meta_model"},
               {"task", a.task},
               {"encoder_hash", enc.hash()},
               {"bank", bank.labels()},
               {"latent_dim", dims.latent_dim},
               {"hidden", dims.hidden}};
    save_checkpoint(a.out, ck);
    report = {{"kind", "meta_model"},
              {"mse", meta::regression_mse(fit.params, meta::meta_model_spec(dims), inputs, data.reward)}};
  }
  std::cout << report.dump() << "\n";
}

// ---- latent task classification

std::vector<std::vector<double>> latent_samples(const meta::UniversalEncoder& enc, const std::string& task,
                                                std::size_t episodes, Rng& rng) {
  auto env = envs::make_env(task);
  if (env->spec().obs_dim != enc.obs_dim()) throw ConfigError("task '" + task + "' does not fit the encoder");
  const meta::RewardDataset d = meta::collect_reward_dataset(*env, enc, episodes, rng);
  std::vector<std::vector<double>> out;
  const std::size_t m = enc.latent_dim();
  for (std::size_t r = 0; r < d.size(); ++r)
    out.emplace_back(d.latent.values().begin() + static_cast<long>(r * m),
                     d.latent.values().begin() + static_cast<long>((r + 1) * m));
  return out;
}

struct LtcArgs {
  std::string encoder;
  std::vector<std::string> tasks;
  std::size_t episodes = 2;
  std::size_t k = ltc::kDefaultNeighbors;
  double xi = 1.0;
  std::uint64_t seed = 1;
  std::string model;
  std::string samples;
  std::string out;
};

void fit_ltc(const LtcArgs& a) {
  const meta::UniversalEncoder enc = meta::load_universal_encoder(load_checkpoint(a.encoder));
  Rng rng(a.seed);
  std::vector<std::vector<std::vector<double>>> samples;
  for (const auto& t : a.tasks) samples.push_back(latent_samples(enc, t, a.episodes, rng));
  const ltc::LtcModel m = ltc::fit(samples, a.tasks, a.k, a.xi);
  json doc = ltc::model_to_json(m);
  doc["encoder_hash"] = enc.hash();
  write_json_file(a.out, doc, -1);
  std::cout << "stored " << m.points.size() << " points for " << a.tasks.size() << " tasks in " << a.out << "\n";
}

void classify(const LtcArgs& a) {
  json doc = read_json_file(a.model);
  std::optional<meta::UniversalEncoder> enc;
  if (!a.encoder.empty()) {
    enc = meta::load_universal_encoder(load_checkpoint(a.encoder));
    if (doc.contains("encoder_hash") && doc["encoder_hash"] != enc->hash())
      throw ConfigError("LTC model was fitted with a different encoder");
  }
  doc.erase("encoder_hash");
  const ltc::LtcModel m = ltc::model_from_json(doc);
  json report = json::array();
  if (!a.samples.empty()) {
    const auto samples = read_json_file(a.samples).get<std::vector<std::vector<double>>>();
    const auto v = ltc::batch_classify(m, samples);
    json labels = json::array();
    for (const auto& s : v.per_sample) labels.push_back(ltc::verdict_name(m, s));
    emit(a.out, json{{"labels", labels}, {"verdict", ltc::verdict_name(m, v.majority)}}.dump(1) + "\n");
    return;
  }
  if (a.tasks.empty() || a.encoder.empty()) throw ConfigError("classify needs --samples or --encoder with --tasks");
  Rng rng(a.seed);
  for (const auto& t : a.tasks) {
    const auto v = ltc::batch_classify(m, latent_samples(*enc, t, a.episodes, rng));
    std::size_t novel = 0;
    for (const auto& s : v.per_sample) novel += !s.has_value();
    report.push_back({{"task", t},
                      {"verdict", ltc::verdict_name(m, v.majority)},
                      {"samples", v.per_sample.size()},
                      {"novel_fraction", double(novel) / double(v.per_sample.size())}});
  }
  emit(a.out, report.dump(1) + "\n");
}

// ---- evaluate

struct EvalArgs {
  std::string checkpoint;
  std::string task;
  std::size_t episodes = 5;
  std::uint64_t seed = 1;
};

void run_evaluate(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  if (!ck.meta.contains("dims")) throw ConfigError("checkpoint carries no agent dims");
  const AgentDims dims = dims_from_json(ck.meta["dims"]);
  std::unique_ptr<envs::Env> env = envs::make_env(a.task);
  if (env->spec().obs_dim != dims.obs_dim) throw ConfigError("task observations do not fit the agent");
  if (env->spec().action_dim > dims.action_dim) throw ConfigError("task actions do not fit the agent");
  env = envs::pad_action_space(std::move(env), dims.action_dim);
  Rng rng(a.seed);
  const EvalResult r = evaluate(dims, ck.params, *env, a.episodes, rng);
  std::cout << json{{"task", a.task}, {"mean_return", r.mean_return}, {"returns", r.returns}}.dump() << "\n";
}

// ---- metrics and plots

std::vector<MetricsRecord> read_all(const std::vector<std::string>& files) {
  std::vector<MetricsRecord> out;
  for (const auto& f : files) {
    auto recs = read_metrics(f);
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

struct MetricsArgs {
  std::vector<std::string> transfer;
  std::vector<std::string> baseline;
  std::string task;
  std::string name = "transfer";
  double final_window = 0.1;
  double sd = 1.0;
  double margin = 0.0;
  bool as_json = false;
};

void run_metrics(const MetricsArgs& a) {
  const TlMetrics m = tl_metrics(curves_for_task(read_all(a.transfer), a.task),
                                 curves_for_task(read_all(a.baseline), a.task),
                                 {a.final_window, a.sd, a.margin});
  if (a.as_json) {
    std::cout << json{{"jumpstart", m.jumpstart},
                      {"overall", m.overall},
                      {"final", m.final_perf},
                      {"transfer_overall", m.transfer_overall},
                      {"baseline_overall", m.baseline_overall},
                      {"transfer_final", m.transfer_final},
                      {"baseline_final", m.baseline_final},
                      {"pooled_sd", m.pooled_sd},
                      {"verdict", to_string(m.verdict)}}
                     .dump(1)
              << "\n";
  } else {
    std::cout << summary_tables({{a.name, m}});
  }
}

struct PlotArgs {
  std::vector<std::string> series;  // label=file[,file...]
  std::string task;
  std::string title;
  std::string band = "minmax";
  std::string out;
};

void run_plot(const PlotArgs& a) {
  std::vector<PlotSeries> series;
  for (const auto& spec : a.series) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("series must look like label=file[,file...]");
    PlotSeries s;
    s.label = spec.substr(0, eq);
    std::vector<std::string> files;
    std::stringstream ss(spec.substr(eq + 1));
    for (std::string f; std::getline(ss, f, ',');)
      if (!f.empty()) files.push_back(f);
    s.seeds = curves_for_task(read_all(files), a.task);
    series.push_back(std::move(s));
  }
  PlotOptions opt;
  opt.title = a.title;
  if (a.band == "std") {
    opt.band = BandKind::std_dev;
  } else if (a.band != "minmax") {
    throw ConfigError("band must be minmax or std");
  }
  emit(a.out, plot_svg(series, opt));
}

void add_train_options(CLI::App* cmd, TrainArgs& a, bool target) {
  cmd->add_option("-c,--config", a.config, "run config (JSON)");
  cmd->add_option("-o,--out", a.out, "output root; runs land in <out>/<run_id>/seed_<n>");
  cmd->add_option("--seed", a.seeds, "seeds (override config)");
  cmd->add_option("--budget", a.budget, "environment steps (override config)");
  cmd->add_option("--tasks", a.tasks, "tasks (override config)")->delimiter(',');
  cmd->add_option("--run-id", a.run_id, "run id (override config)");
  cmd->add_option("--freeze", a.freeze, "parameter prefixes held fixed")->delimiter(',');
  cmd->add_flag("--resume", a.resume, "continue runs that left a checkpoint");
  if (target) {
    cmd->add_option("--source", a.source, "source agent checkpoint");
    cmd->add_option("--mode", a.mode, "default | identity | full | random_init | map");
    cmd->add_option("--omega", a.omega, "fractional transfer weight");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based multi-source transfer learning toolkit"};
  app.require_subcommand(1);

  SolveMdpArgs mdp_args;
  auto* solve = app.add_subcommand("solve-mdp", "Solve a tabular MDP");
  solve->add_option("--mdp", mdp_args.mdp_file, "MDP file (JSON)");
  solve->add_option("--gridworld", mdp_args.gridworld, "use the built-in gridworld of this side");
  solve->add_option("--gamma", mdp_args.gamma, "discount for --gridworld");
  solve->add_option("--method", mdp_args.method, "vi | pi | q");
  solve->add_option("--steps", mdp_args.steps, "Q-learning updates");
  solve->add_option("--seed", mdp_args.seed);
  solve->add_option("-o,--out", mdp_args.out, "output file (default stdout)");

  TrainArgs source_args, target_args;
  auto* train_source = app.add_subcommand("train-source", "Train agents from scratch");
  add_train_options(train_source, source_args, false);
  auto* train_target = app.add_subcommand("train-target", "Train agents initialised by transfer");
  add_train_options(train_target, target_args, true);

  TransferArgs tr;
  auto* transfer_cmd = app.add_subcommand("transfer", "Build a target agent from a source checkpoint");
  transfer_cmd->add_option("--source", tr.source)->required();
  transfer_cmd->add_option("--task", tr.task, "target task; a fresh agent is initialised for it");
  transfer_cmd->add_option("--fresh", tr.fresh, "fresh target checkpoint to transfer into instead of --task");
  transfer_cmd->add_option("--mode", tr.mode, "default | identity | full | random_init | map");
  transfer_cmd->add_option("--omega", tr.omega);
  transfer_cmd->add_option("--map", tr.map_file, "transfer map (JSON) for --mode map");
  transfer_cmd->add_option("--seed", tr.seed);
  transfer_cmd->add_option("-o,--out", tr.out)->required();

  MetaArgs ma;
  auto* meta_cmd = app.add_subcommand("train-meta", "Fit a source reward model, or a meta model over a bank");
  meta_cmd->add_option("--encoder", ma.encoder, "checkpoint holding the universal encoder")->required();
  meta_cmd->add_option("--task", ma.task)->required();
  meta_cmd->add_option("--bank", ma.bank, "bank manifest; omit to fit a source reward model");
  meta_cmd->add_option("--episodes", ma.episodes);
  meta_cmd->add_option("--steps", ma.steps);
  meta_cmd->add_option("--hidden", ma.hidden);
  meta_cmd->add_option("--seed", ma.seed);
  meta_cmd->add_option("-o,--out", ma.out)->required();

  LtcArgs fit_args, cls_args;
  auto* fit_cmd = app.add_subcommand("fit-ltc", "Store latent samples of known tasks");
  fit_cmd->add_option("--encoder", fit_args.encoder)->required();
  fit_cmd->add_option("--tasks", fit_args.tasks)->required()->delimiter(',');
  fit_cmd->add_option("--episodes", fit_args.episodes);
  fit_cmd->add_option("-k", fit_args.k);
  fit_cmd->add_option("--xi", fit_args.xi, "novelty threshold (Manhattan)");
  fit_cmd->add_option("--seed", fit_args.seed);
  fit_cmd->add_option("-o,--out", fit_args.out)->required();
  auto* cls_cmd = app.add_subcommand("classify", "Classify tasks as known or novel");
  cls_cmd->add_option("--model", cls_args.model)->required();
  cls_cmd->add_option("--samples", cls_args.samples, "latent samples (JSON array of vectors)");
  cls_cmd->add_option("--encoder", cls_args.encoder);
  cls_cmd->add_option("--tasks", cls_args.tasks)->delimiter(',');
  cls_cmd->add_option("--episodes", cls_args.episodes);
  cls_cmd->add_option("--seed", cls_args.seed);
  cls_cmd->add_option("-o,--out", cls_args.out);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "Noise-free policy rollouts of a checkpoint");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
  eval_cmd->add_option("--task", ea.task)->required();
  eval_cmd->add_option("--episodes", ea.episodes);
  eval_cmd->add_option("--seed", ea.seed);

  MetricsArgs mt;
  auto* metrics_cmd = app.add_subcommand("metrics", "Jumpstart, overall and final transfer metrics");
  metrics_cmd->add_option("--transfer", mt.transfer, "metrics logs of the transfer runs")->required();
  metrics_cmd->add_option("--baseline", mt.baseline, "metrics logs of the baseline runs")->required();
  metrics_cmd->add_option("--task", mt.task, "restrict to one task");
  metrics_cmd->add_option("--name", mt.name, "row label");
  metrics_cmd->add_option("--final-window", mt.final_window);
  metrics_cmd->add_option("--sd", mt.sd, "pooled-sd multiplier of the verdict");
  metrics_cmd->add_option("--margin", mt.margin);
  metrics_cmd->add_flag("--json", mt.as_json);

  PlotArgs pa;
  auto* plot_cmd = app.add_subcommand("plot", "Learning curves as SVG");
  plot_cmd->add_option("--series", pa.series, "label=file[,file...]")->required();
  plot_cmd->add_option("--task", pa.task);
  plot_cmd->add_option("--title", pa.title);
  plot_cmd->add_option("--band", pa.band, "minmax | std");
  plot_cmd->add_option("-o,--out", pa.out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) solve_mdp(mdp_args);
    if (*train_source) train(source_args, false);
    if (*train_target) train(target_args, true);
    if (*transfer_cmd) make_transfer(tr);
    if (*meta_cmd) train_meta(ma);
    if (*fit_cmd) fit_ltc(fit_args);
    if (*cls_cmd) classify(cls_args);
    if (*eval_cmd) run_evaluate(ea);
    if (*metrics_cmd) run_metrics(mt);
    if (*plot_cmd) run_plot(pa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
