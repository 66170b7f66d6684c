#include "mbtl/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mbtl::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

Tape& common_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument("vars belong to different tapes");
  return *a.tape;
}

std::string shape_str(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape().size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape()[i]);
  }
  return s + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <typename F, typename D>
Var unary(Var x, F f, D dfdx) {
  Tape& tape = *x.tape;
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const std::size_t xid = x.id;
  Tape* tp = &tape;
  const std::size_t out_id = tape.size();
  return tape.record(std::move(out), {x.id}, [tp, xid, out_id, dfdx](const Tensor& g, std::vector<Tensor*>& gin) {
    const Tensor& xin = tp->value(xid);
    const Tensor& y = tp->value(out_id);
    Tensor& gx = *gin[0];
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xin[i], y[i]);
  });
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return {this, it->second};
  Node n;
  n.value = value;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  params_.emplace(name, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Backprop backprop) {
  if (consumed_) throw std::logic_error("Tape::record: tape already consumed by backward");
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) { return nodes_[i].requires_grad; });
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape());
}

Gradients Tape::backward(Var loss) {
  if (consumed_) throw std::logic_error("Tape::backward: a tape supports a single backward pass");
  if (loss.tape != this) throw std::invalid_argument("Tape::backward: loss belongs to another tape");
  if (nodes_[loss.id].value.size() != 1) throw std::invalid_argument("Tape::backward: loss must be a scalar");
  consumed_ = true;

  Node& root = nodes_[loss.id];
  root.grad = Tensor(root.value.shape(), 1.0);
  root.has_grad = true;

  std::vector<Tensor*> gin;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.requires_grad || !n.backprop) continue;
    gin.clear();
    for (std::size_t in : n.inputs) {
      Node& src = nodes_[in];
      if (!src.requires_grad) {
        gin.push_back(nullptr);
        continue;
      }
      if (!src.has_grad) {
        src.grad = Tensor(src.value.shape());
        src.has_grad = true;
      }
      gin.push_back(&src.grad);
    }
    n.backprop(n.grad, gin);
  }

  Gradients out;
  for (const auto& [name, id] : params_) {
    const Node& n = nodes_[id];
    out.emplace(name, n.has_grad ? n.grad : Tensor(n.value.shape()));
  }
  return out;
}

Var matmul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  if (B.rows() != k) {
    throw std::invalid_argument("matmul: inner dimensions disagree " + shape_str(A) + " x " + shape_str(B));
  }
  Tensor out(A.rank() <= 1 ? std::vector<std::size_t>{m} : std::vector<std::size_t>{n, m});
  MutMap(out.data().data(), n, m).noalias() = ConstMap(A.data().data(), n, k) * ConstMap(B.data().data(), k, m);
  Tape* tp = &tape;
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(std::move(out), {aid, bid}, [tp, aid, bid, n, k, m](const Tensor& g, std::vector<Tensor*>& gin) {
    ConstMap G(g.data().data(), n, m);
    if (gin[0]) {
      ConstMap Bm(tp->value(bid).data().data(), k, m);
      MutMap(gin[0]->data().data(), n, k).noalias() += G * Bm.transpose();
    }
    if (gin[1]) {
      ConstMap Am(tp->value(aid).data().data(), n, k);
      MutMap(gin[1]->data().data(), k, m).noalias() += Am.transpose() * G;
    }
  });
}

Var add(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a.id, b.id}, [](const Tensor& g, std::vector<Tensor*>& gin) {
    for (Tensor* t : gin)
      if (t)
        for (std::size_t i = 0; i < g.size(); ++i) (*t)[i] += g[i];
  });
}

Var sub(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record(std::move(out), {a.id, b.id}, [](const Tensor& g, std::vector<Tensor*>& gin) {
    if (gin[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
    if (gin[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Tape* tp = &tape;
  const std::size_t aid = a.id, bid = b.id;
  return tape.record(std::move(out), {aid, bid}, [tp, aid, bid](const Tensor& g, std::vector<Tensor*>& gin) {
    if (gin[0]) {
      const Tensor& bv = tp->value(bid);
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * bv[i];
    }
    if (gin[1]) {
      const Tensor& av = tp->value(aid);
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] += g[i] * av[i];
    }
  });
}

Var add_row(Var x, Var row) {
  Tape& tape = common_tape(x, row);
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  const std::size_t n = xv.rows(), m = xv.cols();
  if (rv.size() != m) {
    throw std::invalid_argument("add_row: row of size " + std::to_string(rv.size()) + " does not match " +
                                shape_str(xv));
  }
  Tensor out = xv;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += rv[c];
  return tape.record(std::move(out), {x.id, row.id}, [n, m](const Tensor& g, std::vector<Tensor*>& gin) {
    if (gin[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
    if (gin[1])
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) (*gin[1])[c] += g[r * m + c];
  });
}

Var scale(Var x, double s) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return x.tape->record(std::move(out), {x.id}, [s](const Tensor& g, std::vector<Tensor*>& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * s;
  });
}

Var add_scalar(Var x, double s) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
  return x.tape->record(std::move(out), {x.id}, [](const Tensor& g, std::vector<Tensor*>& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
  });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var square(Var x) {
  return unary(
      x, [](double v) { return v * v; }, [](double in, double) { return 2.0 * in; });
}

Var clamp(Var x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double in, double) { return (in >= lo && in <= hi) ? 1.0 : 0.0; });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& tape = *parts.front().tape;
  const std::size_t n = parts.front().value().rows();
  std::size_t total = 0;
  bool all_vectors = true;
  std::vector<std::size_t> widths, ids;
  for (Var p : parts) {
    if (p.tape != &tape) throw std::invalid_argument("concat_cols: vars belong to different tapes");
    const Tensor& v = p.value();
    if (v.rows() != n) throw std::invalid_argument("concat_cols: row count mismatch");
    all_vectors = all_vectors && v.rank() <= 1;
    widths.push_back(v.cols());
    ids.push_back(p.id);
    total += v.cols();
  }
  Tensor out(all_vectors ? std::vector<std::size_t>{total} : std::vector<std::size_t>{n, total});
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < widths[p]; ++c) out[r * total + off + c] = v[r * widths[p] + c];
    off += widths[p];
  }
  return tape.record(std::move(out), ids, [n, total, widths](const Tensor& g, std::vector<Tensor*>& gin) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      if (gin[p])
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < widths[p]; ++c) (*gin[p])[r * widths[p] + c] += g[r * total + off + c];
      off += widths[p];
    }
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t len) {
  const Tensor& v = x.value();
  const std::size_t n = v.rows(), m = v.cols();
  if (start + len > m) throw std::invalid_argument("slice_cols: range exceeds " + shape_str(v));
  Tensor out(v.rank() <= 1 ? std::vector<std::size_t>{len} : std::vector<std::size_t>{n, len});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < len; ++c) out[r * len + c] = v[r * m + start + c];
  return x.tape->record(std::move(out), {x.id}, [n, m, start, len](const Tensor& g, std::vector<Tensor*>& gin) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < len; ++c) (*gin[0])[r * m + start + c] += g[r * len + c];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape->record(Tensor::scalar(s), {x.id}, [](const Tensor& g, std::vector<Tensor*>& gin) {
    const double gv = g[0];
    for (double& t : gin[0]->data()) t += gv;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw std::invalid_argument("mean: empty tensor");
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape->record(Tensor::scalar(s / static_cast<double>(n)), {x.id},
                        [n](const Tensor& g, std::vector<Tensor*>& gin) {
                          const double gv = g[0] / static_cast<double>(n);
                          for (double& t : gin[0]->data()) t += gv;
                        });
}

Var row_sum(Var x) {
  const Tensor& v = x.value();
  const std::size_t n = v.rows(), m = v.cols();
  Tensor out({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += v[r * m + c];
    out[r] = s;
  }
  return x.tape->record(std::move(out), {x.id}, [n, m](const Tensor& g, std::vector<Tensor*>& gin) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c) (*gin[0])[r * m + c] += g[r];
  });
}

Var stop_gradient(Var x) { return x.tape->constant(x.value()); }

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

Var mse_loss(Var y, Var yhat) {
  require_same_shape(y.value(), yhat.value(), "mse_loss");
  return mean(scale(square(sub(y, yhat)), 0.5));
}

Var gaussian_sample(Var mu, Var log_std, Noise noise) {
  require_same_shape(mu.value(), log_std.value(), "gaussian_sample");
  if (!noise.active()) return mu;
  Tensor eps(mu.value().shape());
  for (double& e : eps.data()) e = noise.scale * standard_normal(*noise.rng);
  Var std_dev = exp(clamp(log_std, kLogStdMin, kLogStdMax));
  return add(mu, mul(std_dev, mu.tape->constant(std::move(eps))));
}

Var kl_diag_gaussian(Var mu_q, Var log_std_q, Var mu_p, Var log_std_p) {
  require_same_shape(mu_q.value(), mu_p.value(), "kl_diag_gaussian");
  require_same_shape(log_std_q.value(), log_std_p.value(), "kl_diag_gaussian");
  Var lq = clamp(log_std_q, kLogStdMin, kLogStdMax);
  Var lp = clamp(log_std_p, kLogStdMin, kLogStdMax);
  // ½(r − 1 − log r) with r = σq²/σp², written via expm1 so identical
  // distributions give exactly 0 and rounding cannot go negative
  Var x = scale(sub(lq, lp), 2.0);
  Var spread = unary(
      x, [](double v) { return std::max(0.0, std::expm1(v) - v); }, [](double in, double) { return std::expm1(in); });
  Var shift = mul(square(sub(mu_q, mu_p)), exp(scale(lp, -2.0)));
  Var per_dim = scale(add(spread, shift), 0.5);
  return row_sum(per_dim);
}

}  // namespace mbtl::ad
