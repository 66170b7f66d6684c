#include "mbtl/transfer.hpp"

#include <cmath>
#include <stdexcept>

#include "mbtl/errors.hpp"

namespace mbtl::transfer {

namespace {

void require_omega(double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw std::invalid_argument("transfer fraction omega must lie in [0, 1], got " + std::to_string(omega));
  }
}

const ParamEntry& source_entry(const ParamStore& source, const std::string& name, const ParamEntry& target) {
  if (!source.contains(name)) throw std::invalid_argument("apply_transfer: source has no parameter '" + name + "'");
  const ParamEntry& s = source.at(name);
  if (s.tag != target.tag) {
    throw std::invalid_argument("apply_transfer: '" + name + "' is tagged " + std::string(to_string(s.tag)) +
                                " in the source but " + std::string(to_string(target.tag)) + " in the target");
  }
  if (!s.value.same_shape(target.value)) {
    throw std::invalid_argument("apply_transfer: shape mismatch on '" + name + "'");
  }
  return s;
}

}  // namespace

TransferMode TransferMode::fractional(double omega) {
  require_omega(omega);
  return {Kind::fractional, omega};
}

std::string to_string(const TransferMode& mode) {
  switch (mode.kind) {
    case TransferMode::Kind::full:
      return "full";
    case TransferMode::Kind::fractional:
      return "fractional(" + std::to_string(mode.omega) + ")";
    case TransferMode::Kind::random_init:
      return "random_init";
    case TransferMode::Kind::identity:
      return "identity";
  }
  return "?";
}

ad::Tensor fractional_transfer(const ad::Tensor& init, const ad::Tensor& source, double omega) {
  require_omega(omega);
  if (!init.same_shape(source)) throw std::invalid_argument("fractional_transfer: shape mismatch");
  ad::Tensor out = init;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = init[i] + omega * source[i];
  return out;
}

ParamStore apply_transfer(const ParamStore& source, const ParamStore& fresh, const TransferMap& map) {
  ParamStore out;
  for (const auto& [name, entry] : fresh.entries()) {
    const auto it = map.find(entry.tag);
    if (it == map.end()) {
      throw std::invalid_argument("apply_transfer: no transfer mode for tag " + std::string(to_string(entry.tag)));
    }
    const TransferMode& mode = it->second;
    switch (mode.kind) {
      case TransferMode::Kind::full:
      case TransferMode::Kind::identity:
        out.add(name, source_entry(source, name, entry).value, entry.tag);
        break;
      case TransferMode::Kind::fractional:
        out.add(name, fractional_transfer(entry.value, source_entry(source, name, entry).value, mode.omega),
                entry.tag);
        break;
      case TransferMode::Kind::random_init:
        out.add(name, entry.value, entry.tag);
        break;
    }
  }
  return out;
}

TransferMap default_dreamer_map(double omega) {
  using enum ComponentTag;
  const TransferMode frac = TransferMode::fractional(omega);
  return {
      {encoder, TransferMode::full()},         {decoder, TransferMode::full()},
      {transition, TransferMode::full()},      {reward_hidden, TransferMode::full()},
      {value_hidden, TransferMode::full()},    {actor_hidden, TransferMode::full()},
      {reward_last, frac},                     {value_last, frac},
      {actor_last, TransferMode::random_init()}, {action_input, TransferMode::random_init()},
  };
}

TransferMap uniform_map(TransferMode mode) {
  if (mode.kind == TransferMode::Kind::fractional) require_omega(mode.omega);
  TransferMap map;
  for (ComponentTag tag : kAllComponentTags) map.emplace(tag, mode);
  return map;
}

nlohmann::json map_to_json(const TransferMap& map) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [tag, mode] : map) {
    const std::string key(to_string(tag));
    switch (mode.kind) {
      case TransferMode::Kind::full:
        doc[key] = "full";
        break;
      case TransferMode::Kind::random_init:
        doc[key] = "random_init";
        break;
      case TransferMode::Kind::identity:
        doc[key] = "identity";
        break;
      case TransferMode::Kind::fractional:
        doc[key] = {{"mode", "fractional"}, {"omega", mode.omega}};
        break;
    }
  }
  return doc;
}

TransferMap map_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("transfer map must be an object of tag -> mode");
  TransferMap map;
  for (const auto& [key, value] : doc.items()) {
    ComponentTag tag;
    try {
      tag = parse_component_tag(key);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    TransferMode mode;
    const std::string kind =
        value.is_string() ? value.get<std::string>() : value.is_object() ? value.value("mode", "") : "";
    if (kind == "full") {
      mode = TransferMode::full();
    } else if (kind == "random_init") {
      mode = TransferMode::random_init();
    } else if (kind == "identity") {
      mode = TransferMode::identity();
    } else if (kind == "fractional") {
      if (!value.is_object() || !value.contains("omega") || !value["omega"].is_number()) {
        throw ConfigError("transfer map: fractional mode for " + key + " needs a numeric omega");
      }
      const double omega = value["omega"].get<double>();
      if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("transfer map: omega for " + key + " outside [0, 1]");
      mode = TransferMode::fractional(omega);
    } else {
      throw ConfigError("transfer map: unknown mode for " + key);
    }
    map[tag] = mode;
  }
  return map;
}

}  // namespace mbtl::transfer
