#include "mbtl/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "mbtl/errors.hpp"

namespace mbtl {

nlohmann::json params_to_json(const ParamStore& params) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, e] : params.entries()) {
    for (double v : e.value.data())
      if (!std::isfinite(v)) throw NumericError("checkpoint: parameter '" + name + "' holds a non-finite value");
    out[name] = {{"tag", std::string(to_string(e.tag))}, {"shape", e.value.shape()}, {"data", e.value.values()}};
  }
  return out;
}

ParamStore params_from_json(const nlohmann::json& doc) {
  ParamStore out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& e = it.value();
    out.add(it.key(),
            ad::Tensor(e.at("shape").get<std::vector<std::size_t>>(), e.at("data").get<std::vector<double>>()),
            parse_component_tag(e.at("tag").get<std::string>()));
  }
  return out;
}

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json tags = nlohmann::json::array();
  for (ComponentTag t : ckpt.params.tags()) tags.push_back(std::string(to_string(t)));
  return {{"format_version", kCheckpointFormatVersion},
          {"seed", ckpt.seed},
          {"components", tags},
          {"params", params_to_json(ckpt.params)},
          {"meta", ckpt.meta}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw ConfigError("checkpoint: unsupported format_version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.seed = doc.at("seed").get<std::uint64_t>();
    ckpt.params = params_from_json(doc.at("params"));
    if (doc.contains("meta")) ckpt.meta = doc.at("meta");
    std::set<std::string> declared;
    for (const auto& t : doc.at("components")) declared.insert(t.get<std::string>());
    for (ComponentTag t : ckpt.params.tags()) {
      if (!declared.count(std::string(to_string(t)))) {
        throw ConfigError("checkpoint: header does not declare component '" + std::string(to_string(t)) + "'");
      }
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed document: ") + e.what());
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc, int indent) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << doc.dump(indent) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_json_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json_file(path)); }

}  // namespace mbtl
