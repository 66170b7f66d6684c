#pragma once

#include <map>
#include <string>

#include "json.hpp"
#include "mbtl/param_store.hpp"

namespace mbtl::transfer {

/// How a target component is initialized from a source agent.
struct TransferMode {
  enum class Kind { full, fractional, random_init, identity };

  Kind kind = Kind::random_init;
  double omega = 0.0;  // only meaningful for fractional

  static TransferMode full() { return {Kind::full, 0.0}; }
  static TransferMode fractional(double omega);
  static TransferMode random_init() { return {Kind::random_init, 0.0}; }
  static TransferMode identity() { return {Kind::identity, 0.0}; }

  bool operator==(const TransferMode&) const = default;
};

using TransferMap = std::map<ComponentTag, TransferMode>;

std::string to_string(const TransferMode& mode);

/// init + ω·source, elementwise.
ad::Tensor fractional_transfer(const ad::Tensor& init, const ad::Tensor& source, double omega);

/// Builds the target store entry by entry from `fresh`: full and identity
/// copy the source array, fractional applies the rule above and random_init
/// keeps the fresh array. Biases follow their layer's tag.
ParamStore apply_transfer(const ParamStore& source, const ParamStore& fresh, const TransferMap& map);

/// Dynamics, representation and hidden layers transfer fully; the last
/// reward and value layers fractionally; action-facing weights restart.
TransferMap default_dreamer_map(double omega);
/// Every tag mapped to the same mode.
TransferMap uniform_map(TransferMode mode);

/// {"<tag>": "full" | "random_init" | "identity" | {"mode": "fractional", "omega": ω}}
nlohmann::json map_to_json(const TransferMap& map);
TransferMap map_from_json(const nlohmann::json& doc);

}  // namespace mbtl::transfer
