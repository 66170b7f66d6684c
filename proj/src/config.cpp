#include "mbtl/config.hpp"

#include <cmath>
#include <set>

#include "mbtl/checkpoint.hpp"
#include "mbtl/errors.hpp"

namespace mbtl {

namespace {

using nlohmann::json;

// Reads known keys of one section and rejects the rest.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      if (!doc[name_].is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
      doc_ = doc[name_];
    } else {
      doc_ = json::object();
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_[key].get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config " + name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items())
      if (!seen_.contains(key)) throw ConfigError("config: unknown key " + name_ + "." + key);
  }

 private:
  std::string name_;
  json doc_;
  std::set<std::string> seen_;
};

}  // namespace

long RunConfig::effective_eval_interval() const {
  if (eval_interval > 0) return eval_interval;
  return std::max(1L, budget / 100);
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (run_id.empty()) fail("run_id must not be empty");
  if (tasks.empty()) fail("at least one task is required");
  if (seeds.empty()) fail("at least one seed is required");
  if (budget < 0) fail("budget must be >= 0");
  if (eval_interval < 0) fail("eval_interval must be >= 0");
  if (eval_episodes == 0) fail("eval_episodes must be positive");
  if (initial_episodes == 0) fail("initial_episodes must be positive");
  if (model.deter == 0 || model.stoch == 0 || model.hidden == 0 || model.embed == 0 || model.ac_hidden == 0) {
    fail("model sizes must be positive");
  }
  const auto& t = train;
  if (t.updates_per_collect == 0 || t.batch == 0 || t.seq_len < 2 || t.horizon == 0) {
    fail("updates_per_collect, batch and horizon must be positive and seq_len >= 2");
  }
  if (!(t.gamma >= 0.0 && t.gamma < 1.0)) fail("gamma must lie in [0, 1)");
  if (!(t.lambda >= 0.0 && t.lambda <= 1.0)) fail("lambda must lie in [0, 1]");
  if (!(t.explore_noise >= 0.0)) fail("explore_noise must be >= 0");
  for (double lr : {t.wm_lr, t.actor_lr, t.value_lr})
    if (!(lr > 0.0) || !std::isfinite(lr)) fail("learning rates must be positive");
  if (!(t.clip_norm >= 0.0)) fail("clip_norm must be >= 0");
  if (!(t.kl_weight >= 0.0)) fail("kl_weight must be >= 0");
  const std::set<std::string> modes{"default", "identity", "full", "random_init", "map"};
  if (!modes.contains(transfer.mode)) fail("unknown transfer mode '" + transfer.mode + "'");
  if (transfer.mode == "map" && transfer.map_file.empty()) fail("transfer mode 'map' needs map_file");
  if (!(transfer.omega >= 0.0 && transfer.omega <= 1.0)) fail("omega must lie in [0, 1]");
}

json config_to_json(const RunConfig& c) {
  return {{"format_version", kConfigFormatVersion},
          {"run",
           {{"run_id", c.run_id},
            {"tasks", c.tasks},
            {"seeds", c.seeds},
            {"budget", c.budget},
            {"eval_interval", c.eval_interval},
            {"eval_episodes", c.eval_episodes},
            {"initial_episodes", c.initial_episodes},
            {"log_wall_time", c.log_wall_time},
            {"freeze", c.freeze}}},
          {"model",
           {{"deter", c.model.deter},
            {"stoch", c.model.stoch},
            {"hidden", c.model.hidden},
            {"embed", c.model.embed},
            {"ac_hidden", c.model.ac_hidden}}},
          {"train",
           {{"updates_per_collect", c.train.updates_per_collect},
            {"batch", c.train.batch},
            {"seq_len", c.train.seq_len},
            {"horizon", c.train.horizon},
            {"gamma", c.train.gamma},
            {"lambda", c.train.lambda},
            {"imagine_starts", c.train.imagine_starts},
            {"explore_noise", c.train.explore_noise},
            {"wm_lr", c.train.wm_lr},
            {"actor_lr", c.train.actor_lr},
            {"value_lr", c.train.value_lr},
            {"clip_norm", c.train.clip_norm},
            {"kl_weight", c.train.kl_weight},
            {"target_every", c.train.target_every}}},
          {"transfer",
           {{"source", c.transfer.source},
            {"mode", c.transfer.mode},
            {"map_file", c.transfer.map_file},
            {"omega", c.transfer.omega}}}};
}

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be an object");
  if (doc.value("format_version", kConfigFormatVersion) != kConfigFormatVersion) {
    throw ConfigError("config: unsupported format_version");
  }
  for (const auto& [key, value] : doc.items()) {
    if (key != "format_version" && key != "run" && key != "model" && key != "train" && key != "transfer") {
      throw ConfigError("config: unknown section '" + key + "'");
    }
  }
  RunConfig c;
  Section run(doc, "run");
  run.get("run_id", c.run_id);
  run.get("tasks", c.tasks);
  run.get("seeds", c.seeds);
  run.get("budget", c.budget);
  run.get("eval_interval", c.eval_interval);
  run.get("eval_episodes", c.eval_episodes);
  run.get("initial_episodes", c.initial_episodes);
  run.get("log_wall_time", c.log_wall_time);
  run.get("freeze", c.freeze);
  run.finish();
  Section model(doc, "model");
  model.get("deter", c.model.deter);
  model.get("stoch", c.model.stoch);
  model.get("hidden", c.model.hidden);
  model.get("embed", c.model.embed);
  model.get("ac_hidden", c.model.ac_hidden);
  model.finish();
  Section train(doc, "train");
  train.get("updates_per_collect", c.train.updates_per_collect);
  train.get("batch", c.train.batch);
  train.get("seq_len", c.train.seq_len);
  train.get("horizon", c.train.horizon);
  train.get("gamma", c.train.gamma);
  train.get("lambda", c.train.lambda);
  train.get("imagine_starts", c.train.imagine_starts);
  train.get("explore_noise", c.train.explore_noise);
  train.get("wm_lr", c.train.wm_lr);
  train.get("actor_lr", c.train.actor_lr);
  train.get("value_lr", c.train.value_lr);
  train.get("clip_norm", c.train.clip_norm);
  train.get("kl_weight", c.train.kl_weight);
  train.get("target_every", c.train.target_every);
  train.finish();
  Section transfer(doc, "transfer");
  transfer.get("source", c.transfer.source);
  transfer.get("mode", c.transfer.mode);
  transfer.get("map_file", c.transfer.map_file);
  transfer.get("omega", c.transfer.omega);
  transfer.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

}  // namespace mbtl
