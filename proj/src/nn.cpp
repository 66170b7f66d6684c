#include "mbtl/nn.hpp"

#include <stdexcept>

namespace mbtl::nn {

void add_dense(ParamStore& params, const std::string& prefix, std::size_t in, std::size_t out, ComponentTag tag,
               Rng& rng, bool zero_weights) {
  params.add(prefix + "/w", zero_weights ? ad::Tensor({in, out}) : glorot_uniform(in, out, rng), tag);
  params.add(prefix + "/b", ad::Tensor({out}), tag);
}

ad::Var dense(ad::Tape& tape, const ParamStore& params, const std::string& prefix, ad::Var x) {
  const std::string w = prefix + "/w", b = prefix + "/b";
  return ad::linear(x, tape.param(w, params.value(w)), tape.param(b, params.value(b)));
}

void add_mlp(ParamStore& params, const MlpSpec& spec, Rng& rng) {
  if (spec.sizes.size() < 2) throw std::invalid_argument("add_mlp: need at least input and output sizes");
  for (std::size_t i = 0; i < spec.layers(); ++i) {
    const bool last = i + 1 == spec.layers();
    add_dense(params, spec.layer(i), spec.sizes[i], spec.sizes[i + 1], last ? spec.last_tag : spec.hidden_tag, rng,
              last && spec.zero_last);
  }
}

ad::Var mlp(ad::Tape& tape, const ParamStore& params, const MlpSpec& spec, ad::Var x) {
  for (std::size_t i = 0; i < spec.layers(); ++i) {
    x = dense(tape, params, spec.layer(i), x);
    if (i + 1 < spec.layers()) x = ad::relu(x);
  }
  return x;
}

}  // namespace mbtl::nn
