#include "mbtl/optim.hpp"

#include "mbtl/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace mbtl {

namespace {

void check_grad(const ParamStore& params, const std::string& name, const ad::Tensor& g) {
  if (!params.contains(name)) throw std::invalid_argument("optimizer: gradient for unknown parameter '" + name + "'");
  if (!params.value(name).same_shape(g)) throw std::invalid_argument("optimizer: gradient shape mismatch for '" + name + "'");
}

nlohmann::json tensors_to_json(const std::map<std::string, ad::Tensor>& ts) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, t] : ts) out[name] = {{"shape", t.shape()}, {"data", t.values()}};
  return out;
}

std::map<std::string, ad::Tensor> tensors_from_json(const nlohmann::json& doc) {
  std::map<std::string, ad::Tensor> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    out.emplace(it.key(), ad::Tensor(it.value().at("shape").get<std::vector<std::size_t>>(),
                                     it.value().at("data").get<std::vector<double>>()));
  }
  return out;
}

}  // namespace

double global_norm(const ad::Gradients& grads) {
  double s = 0.0;
  for (const auto& [_, g] : grads)
    for (double v : g.data()) s += v * v;
  return std::sqrt(s);
}

ParamStore sgd_step(const ParamStore& params, const ad::Gradients& grads, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("sgd_step: alpha must be positive");
  ParamStore out = params;
  for (const auto& [name, g] : grads) {
    check_grad(params, name, g);
    ad::Tensor& w = out.mutable_value(name);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= alpha * g[i];
  }
  return out;
}

ParamStore Adam::step(const ParamStore& params, const ad::Gradients& grads) {
  ParamStore out = params;
  ++t_;
  double factor = 1.0;
  if (config_.clip_norm > 0.0) {
    const double norm = global_norm(grads);
    if (!std::isfinite(norm)) throw NumericError("Adam: non-finite gradient norm");
    if (norm > config_.clip_norm) factor = config_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    check_grad(params, name, g);
    auto [mit, _m] = m_.try_emplace(name, ad::Tensor(g.shape()));
    auto [vit, _v] = v_.try_emplace(name, ad::Tensor(g.shape()));
    ad::Tensor& m = mit->second;
    ad::Tensor& v = vit->second;
    ad::Tensor& w = out.mutable_value(name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * factor;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      w[i] -= config_.alpha * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.eps);
    }
  }
  return out;
}

nlohmann::json Adam::state() const {
  return {{"t", t_}, {"m", tensors_to_json(m_)}, {"v", tensors_to_json(v_)}};
}

void Adam::restore(const nlohmann::json& state) {
  t_ = state.at("t").get<long>();
  m_ = tensors_from_json(state.at("m"));
  v_ = tensors_from_json(state.at("v"));
}

}  // namespace mbtl
