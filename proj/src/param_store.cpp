#include "mbtl/param_store.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace mbtl {

std::string_view to_string(ComponentTag tag) {
  switch (tag) {
    case ComponentTag::encoder: return "encoder";
    case ComponentTag::decoder: return "decoder";
    case ComponentTag::transition: return "transition";
    case ComponentTag::reward_hidden: return "reward_hidden";
    case ComponentTag::reward_last: return "reward_last";
    case ComponentTag::actor_hidden: return "actor_hidden";
    case ComponentTag::actor_last: return "actor_last";
    case ComponentTag::value_hidden: return "value_hidden";
    case ComponentTag::value_last: return "value_last";
    case ComponentTag::action_input: return "action_input";
  }
  return "unknown";
}

ComponentTag parse_component_tag(std::string_view name) {
  for (ComponentTag t : kAllComponentTags)
    if (to_string(t) == name) return t;
  throw std::invalid_argument("unknown component tag '" + std::string(name) + "'");
}

void ParamStore::add(const std::string& name, ad::Tensor value, ComponentTag tag) {
  if (!entries_.emplace(name, ParamEntry{std::move(value), tag}).second) {
    throw std::invalid_argument("ParamStore: duplicate parameter name '" + name + "'");
  }
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("ParamStore: no parameter named '" + name + "'");
  return it->second;
}

ad::Tensor& ParamStore::mutable_value(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("ParamStore: no parameter named '" + name + "'");
  return it->second.value;
}

std::set<ComponentTag> ParamStore::tags() const {
  std::set<ComponentTag> out;
  for (const auto& [_, e] : entries_) out.insert(e.tag);
  return out;
}

std::vector<std::string> ParamStore::names_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_)
    if (name.starts_with(prefix)) out.push_back(name);
  return out;
}

ParamStore ParamStore::section(std::string_view prefix) const {
  ParamStore out;
  for (const auto& [name, e] : entries_)
    if (name.starts_with(prefix)) out.entries_.emplace(name, e);
  return out;
}

void ParamStore::merge(const ParamStore& other) {
  for (const auto& [name, e] : other.entries_) entries_.insert_or_assign(name, e);
}

ad::Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  ad::Tensor w({fan_in, fan_out});
  for (double& v : w.data()) v = uniform(rng, -limit, limit);
  return w;
}

std::uint64_t hash_params(const ParamStore& params) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, e] : params.entries()) {
    feed(name.data(), name.size());
    for (std::size_t d : e.value.shape()) {
      const std::uint64_t d64 = d;
      feed(&d64, sizeof d64);
    }
    feed(e.value.data().data(), e.value.size() * sizeof(double));
  }
  return h;
}

}  // namespace mbtl
