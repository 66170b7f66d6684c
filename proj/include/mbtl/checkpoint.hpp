#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "mbtl/param_store.hpp"

namespace mbtl {

inline constexpr int kCheckpointFormatVersion = 1;

/// Versioned checkpoint document: header (format_version, seed, component
/// tags, shapes) plus named row-major arrays. `meta` carries run state owned
/// by the caller (model dims, tasks, optimizer moments, RNG state, ...).
struct Checkpoint {
  std::uint64_t seed = 0;
  ParamStore params;
  nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json params_to_json(const ParamStore& params);
ParamStore params_from_json(const nlohmann::json& doc);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// indent < 0 writes a compact single line.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc, int indent = 1);

}  // namespace mbtl
