#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbtl/envs.hpp"
#include "mbtl/world_model.hpp"

namespace mbtl {

inline constexpr int kReplayFormatVersion = 1;

/// Episodes grouped by task. Episodes are append-only.
class ReplayDataset {
 public:
  void add(envs::Episode episode);

  std::size_t episodes(const std::string& task) const;
  std::size_t total_episodes() const;
  std::size_t total_steps() const { return steps_; }
  std::vector<std::string> tasks() const;
  const std::vector<envs::Episode>& task_episodes(const std::string& task) const;

  /// B windows of L consecutive steps, uniform over task, then episode, then
  /// start offset. Step j of a window carries obs o_t, the action a_{t−1}
  /// that led there (zeros at t = 0) and the reward r_{t−1} (masked at t = 0).
  SequenceBatch sample(std::size_t batch, std::size_t length, Rng& rng) const;

  nlohmann::json to_json() const;
  static ReplayDataset from_json(const nlohmann::json& doc);

  bool operator==(const ReplayDataset&) const = default;

 private:
  std::map<std::string, std::vector<envs::Episode>> by_task_;
  std::size_t steps_ = 0;
};

void save_replay(const std::filesystem::path& path, const ReplayDataset& data);
ReplayDataset load_replay(const std::filesystem::path& path);

}  // namespace mbtl
