#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mbtl/rng.hpp"
#include "mbtl/tensor.hpp"

namespace mbtl::ad {

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

/// Gradients keyed by parameter name.
using Gradients = std::map<std::string, Tensor>;

/// Reverse-mode tape. Nodes are appended in evaluation order, so inputs always
/// precede their consumers and backward is a single reverse sweep.
class Tape {
 public:
  // Receives the output gradient and one accumulator per input; an
  // accumulator is null when that input needs no gradient.
  using Backprop = std::function<void(const Tensor& grad_out, std::vector<Tensor*>& grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf for a named parameter. Repeated calls with the same name return the
  /// same node, so shared weights accumulate one gradient.
  Var param(const std::string& name, const Tensor& value);

  Var record(Tensor value, std::vector<std::size_t> inputs, Backprop backprop);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient of the loss w.r.t. v; valid after backward(). Zero if v was
  /// not reached.
  Tensor grad(Var v) const;

  /// Runs the reverse sweep from a scalar loss. Every parameter registered
  /// on this tape gets an entry; unreachable ones are zero. A tape supports
  /// exactly one backward pass.
  Gradients backward(Var loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    Backprop backprop;
  };

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> params_;
  bool consumed_ = false;
};

/// Noise source for reparameterized sampling. A null rng or zero scale gives
/// the noise-free mode where samples equal their means.
struct Noise {
  Rng* rng = nullptr;
  double scale = 1.0;

  bool active() const { return rng != nullptr && scale != 0.0; }
};

// Differentiable primitives. Elementwise binaries require equal shapes.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var x, Var row);  // broadcast a length-cols row over every row of x
Var scale(Var x, double s);
Var add_scalar(Var x, double s);
Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var square(Var x);
Var clamp(Var x, double lo, double hi);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var x, std::size_t start, std::size_t len);
Var sum(Var x);
Var mean(Var x);
Var row_sum(Var x);  // [n×m] -> [n×1]
Var stop_gradient(Var x);

/// out = xW + b
Var linear(Var x, Var w, Var b);
/// mean over elements of ½(y − ŷ)²
Var mse_loss(Var y, Var yhat);

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// mu + exp(clamp(log_std)) · ε with ε ~ N(0, 1).
Var gaussian_sample(Var mu, Var log_std, Noise noise);
/// Per-row KL(q ‖ p) between diagonal Gaussians, summed over columns -> [n×1].
/// Log-stds are clamped like gaussian_sample.
Var kl_diag_gaussian(Var mu_q, Var log_std_q, Var mu_p, Var log_std_p);

}  // namespace mbtl::ad
