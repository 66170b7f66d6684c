#pragma once

#include <map>
#include <memory>
#include <string>

#include "json.hpp"
#include "mbtl/param_store.hpp"
#include "mbtl/tape.hpp"

namespace mbtl {

/// w ← w − α·g for every gradient entry. Every gradient key must name a
/// parameter of identical shape; parameters without a gradient are copied.
ParamStore sgd_step(const ParamStore& params, const ad::Gradients& grads, double alpha);

/// Common interface for the update rules. step() returns a new store and
/// leaves its input untouched.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual ParamStore step(const ParamStore& params, const ad::Gradients& grads) = 0;
  virtual nlohmann::json state() const = 0;
  virtual void restore(const nlohmann::json& state) = 0;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double alpha) : alpha_(alpha) {}
  ParamStore step(const ParamStore& params, const ad::Gradients& grads) override {
    return sgd_step(params, grads, alpha_);
  }
  nlohmann::json state() const override { return nlohmann::json::object(); }
  void restore(const nlohmann::json&) override {}

 private:
  double alpha_;
};

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Rescales the whole gradient when its global L2 norm exceeds this; 0 disables.
  double clip_norm = 0.0;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}
  ParamStore step(const ParamStore& params, const ad::Gradients& grads) override;
  nlohmann::json state() const override;
  void restore(const nlohmann::json& state) override;
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  long t_ = 0;
  std::map<std::string, ad::Tensor> m_;
  std::map<std::string, ad::Tensor> v_;
};

double global_norm(const ad::Gradients& grads);

}  // namespace mbtl
