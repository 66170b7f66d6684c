#pragma once

#include <string>
#include <vector>

#include "mbtl/param_store.hpp"
#include "mbtl/tape.hpp"

namespace mbtl::nn {

/// Registers `<prefix>/w` (in×out, Glorot uniform) and `<prefix>/b` (zeros).
/// With zero_weights the weight matrix starts at zero as well.
void add_dense(ParamStore& params, const std::string& prefix, std::size_t in, std::size_t out, ComponentTag tag,
               Rng& rng, bool zero_weights = false);

/// xW + b using the `<prefix>/w`, `<prefix>/b` entries of params.
ad::Var dense(ad::Tape& tape, const ParamStore& params, const std::string& prefix, ad::Var x);

/// Layer sizes plus tags: layers `<prefix>/l0 .. l{n-1}`, ReLU between layers,
/// linear output. The last layer gets `last_tag`, the others `hidden_tag`.
struct MlpSpec {
  std::string prefix;
  std::vector<std::size_t> sizes;  // input, hidden..., output
  ComponentTag hidden_tag;
  ComponentTag last_tag;
  bool zero_last = false;

  std::size_t layers() const { return sizes.size() - 1; }
  std::string layer(std::size_t i) const { return prefix + "/l" + std::to_string(i); }
};

void add_mlp(ParamStore& params, const MlpSpec& spec, Rng& rng);
ad::Var mlp(ad::Tape& tape, const ParamStore& params, const MlpSpec& spec, ad::Var x);

}  // namespace mbtl::nn
