#include "mbtl/replay.hpp"

#include <stdexcept>

#include "mbtl/checkpoint.hpp"
#include "mbtl/errors.hpp"

namespace mbtl {

void ReplayDataset::add(envs::Episode episode) {
  const std::size_t T = episode.rewards.size();
  if (T == 0 || episode.actions.size() != T || episode.observations.size() != T + 1) {
    throw std::invalid_argument("ReplayDataset::add: episode needs T+1 observations and T actions/rewards, T >= 1");
  }
  if (!by_task_.empty()) {
    const auto& ref = by_task_.begin()->second.front();
    if (ref.observations.front().size() != episode.observations.front().size() ||
        ref.actions.front().size() != episode.actions.front().size()) {
      throw std::invalid_argument("ReplayDataset::add: episode dims disagree with stored episodes");
    }
  }
  steps_ += T;
  by_task_[episode.task_id].push_back(std::move(episode));
}

std::size_t ReplayDataset::episodes(const std::string& task) const {
  const auto it = by_task_.find(task);
  return it == by_task_.end() ? 0 : it->second.size();
}

std::size_t ReplayDataset::total_episodes() const {
  std::size_t n = 0;
  for (const auto& [task, eps] : by_task_) n += eps.size();
  return n;
}

std::vector<std::string> ReplayDataset::tasks() const {
  std::vector<std::string> out;
  for (const auto& [task, eps] : by_task_) out.push_back(task);
  return out;
}

const std::vector<envs::Episode>& ReplayDataset::task_episodes(const std::string& task) const {
  const auto it = by_task_.find(task);
  if (it == by_task_.end()) throw std::out_of_range("ReplayDataset: no episodes for task '" + task + "'");
  return it->second;
}

SequenceBatch ReplayDataset::sample(std::size_t batch, std::size_t length, Rng& rng) const {
  if (by_task_.empty()) throw std::logic_error("ReplayDataset::sample: dataset is empty");
  if (batch == 0 || length == 0) throw std::invalid_argument("ReplayDataset::sample: batch and length must be positive");
  const auto& first = by_task_.begin()->second.front();
  const std::size_t obs_dim = first.observations.front().size(), act_dim = first.actions.front().size();
  SequenceBatch out;
  for (std::size_t j = 0; j < length; ++j) {
    out.obs.emplace_back(std::vector<std::size_t>{batch, obs_dim});
    out.prev_action.emplace_back(std::vector<std::size_t>{batch, act_dim});
    out.reward.emplace_back(std::vector<std::size_t>{batch, 1});
    out.reward_mask.emplace_back(std::vector<std::size_t>{batch, 1});
  }
  for (std::size_t b = 0; b < batch; ++b) {
    auto task_it = by_task_.begin();
    std::advance(task_it, static_cast<std::ptrdiff_t>(uniform_index(rng, by_task_.size())));
    const auto& eps = task_it->second;
    const envs::Episode& ep = eps[uniform_index(rng, eps.size())];
    const std::size_t steps = ep.observations.size();
    if (length > steps) {
      throw std::invalid_argument("ReplayDataset::sample: sequence length " + std::to_string(length) +
                                  " exceeds an episode of " + std::to_string(steps) + " observations");
    }
    const std::size_t t0 = uniform_index(rng, steps - length + 1);
    for (std::size_t j = 0; j < length; ++j) {
      const std::size_t t = t0 + j;
      for (std::size_t i = 0; i < obs_dim; ++i) out.obs[j].at(b, i) = ep.observations[t][i];
      if (t > 0) {
        for (std::size_t i = 0; i < act_dim; ++i) out.prev_action[j].at(b, i) = ep.actions[t - 1][i];
        out.reward[j].at(b, 0) = ep.rewards[t - 1];
        out.reward_mask[j].at(b, 0) = 1.0;
      }
    }
  }
  return out;
}

nlohmann::json ReplayDataset::to_json() const {
  nlohmann::json tasks = nlohmann::json::object();
  for (const auto& [task, eps] : by_task_) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : eps) {
      list.push_back({{"observations", e.observations}, {"actions", e.actions}, {"rewards", e.rewards}});
    }
    tasks[task] = std::move(list);
  }
  return {{"format_version", kReplayFormatVersion}, {"tasks", std::move(tasks)}};
}

ReplayDataset ReplayDataset::from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format_version", -1) != kReplayFormatVersion) {
    throw ConfigError("replay file: unsupported format_version");
  }
  ReplayDataset out;
  try {
    for (const auto& [task, list] : doc.at("tasks").items()) {
      for (const auto& e : list) {
        envs::Episode ep;
        ep.task_id = task;
        ep.observations = e.at("observations").get<std::vector<std::vector<double>>>();
        ep.actions = e.at("actions").get<std::vector<std::vector<double>>>();
        ep.rewards = e.at("rewards").get<std::vector<double>>();
        out.add(std::move(ep));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed replay file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed replay file: ") + e.what());
  }
  return out;
}

void save_replay(const std::filesystem::path& path, const ReplayDataset& data) { write_json_file(path, data.to_json(), -1); }

ReplayDataset load_replay(const std::filesystem::path& path) { return ReplayDataset::from_json(read_json_file(path)); }

}  // namespace mbtl
