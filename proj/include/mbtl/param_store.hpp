#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mbtl/rng.hpp"
#include "mbtl/tensor.hpp"

namespace mbtl {

/// Which agent component a parameter array belongs to. Transfer surgery and
/// freezing operate on these tags.
enum class ComponentTag {
  encoder,
  decoder,
  transition,
  reward_hidden,
  reward_last,
  actor_hidden,
  actor_last,
  value_hidden,
  value_last,
  action_input,
};

inline constexpr std::array<ComponentTag, 10> kAllComponentTags = {
    ComponentTag::encoder,      ComponentTag::decoder,    ComponentTag::transition,
    ComponentTag::reward_hidden, ComponentTag::reward_last, ComponentTag::actor_hidden,
    ComponentTag::actor_last,   ComponentTag::value_hidden, ComponentTag::value_last,
    ComponentTag::action_input,
};

std::string_view to_string(ComponentTag tag);
ComponentTag parse_component_tag(std::string_view name);

struct ParamEntry {
  ad::Tensor value;
  ComponentTag tag;

  bool operator==(const ParamEntry&) const = default;
};

/// Named parameter arrays. Iteration order is lexicographic by name, which
/// keeps serialization and hashing stable.
class ParamStore {
 public:
  void add(const std::string& name, ad::Tensor value, ComponentTag tag);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const ParamEntry& at(const std::string& name) const;
  const ad::Tensor& value(const std::string& name) const { return at(name).value; }
  ad::Tensor& mutable_value(const std::string& name);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const std::map<std::string, ParamEntry>& entries() const { return entries_; }
  std::set<ComponentTag> tags() const;
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;
  /// Subset of entries whose names start with prefix.
  ParamStore section(std::string_view prefix) const;
  /// Inserts or overwrites every entry of other.
  void merge(const ParamStore& other);

  bool operator==(const ParamStore&) const = default;

 private:
  std::map<std::string, ParamEntry> entries_;
};

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
ad::Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// FNV-1a over names, shapes and the raw bytes of every value.
std::uint64_t hash_params(const ParamStore& params);

}  // namespace mbtl
