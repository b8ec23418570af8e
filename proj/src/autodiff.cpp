// SPDX-License-Identifier: Apache-2.0
#include "m2g2/autodiff.hpp"

#include <cmath>

#include "m2g2/errors.hpp"
#include "m2g2/param_store.hpp"

namespace m2g2 {
namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an unbound Var");
  return *a.tape();
}

Tape& common_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (&tape_of(b) != &t) throw ContractError("operands recorded on different tapes");
  return t;
}

void require_same_shape(const char* op, Var a, Var b) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.value().shape_str() + " vs " +
                     b.value().shape_str());
  }
}

template <typename F>
Tensor map_values(const Tensor& in, F f) {
  Tensor out(in.rows(), in.cols());
  auto src = in.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on an unbound Var");
  return tape_->value(*this);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NonFiniteError("constant: non-finite input");
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  if (!value.all_finite()) throw NonFiniteError("variable: non-finite input");
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled();
  return push(std::move(n));
}

Var Tape::param(ParamStore& store, const std::string& name) {
  auto& cache = bound_[&store];
  if (auto it = cache.find(name); it != cache.end()) return Var(this, it->second);
  const std::size_t index = store.index_of(name);
  Var v = grad_enabled() ? variable(store.entries()[index].value)
                         : constant(store.entries()[index].value);
  cache.emplace(name, v.id());
  if (grad_enabled()) bindings_.push_back({v.id(), &store, index});
  return v;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.rows(), n.value.cols());
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> inputs,
                 BackwardFn fn) {
  if (!value.all_finite()) {
    throw NonFiniteError(std::string(op) + ": produced non-finite values " + value.shape_str());
  }
  Node n;
  n.value = std::move(value);
  if (grad_enabled()) {
    for (Var in : inputs) {
      if (nodes_[in.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return push(std::move(n));
}

void Tape::accumulate(Var target, const Tensor& delta) {
  Node& n = nodes_[target.id()];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = delta;
    n.has_grad = true;
  } else {
    add_in_place(n.grad, delta);
  }
}

void Tape::backward(Var loss) {
  if (!grad_enabled()) throw ContractError("backward: tape was recorded without gradients");
  if (&tape_of(loss) != this) throw ContractError("backward: loss belongs to another tape");
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + lv.shape_str());
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  accumulate(loss, Tensor(1, 1, 1.0));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(n.value, n.grad, *this);
  }
  for (const auto& b : bindings_) {
    const Node& n = nodes_[b.node];
    if (!n.has_grad) continue;
    if (!n.grad.all_finite()) {
      throw NonFiniteError("backward: non-finite gradient for parameter '" +
                           b.store->entries()[b.index].name + "'");
    }
    add_in_place(b.store->entries()[b.index].grad, n.grad);
  }
  for (const auto& b : bindings_) b.store->mark_gradients_pending();
}

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + a.value().shape_str() + " * " +
                     b.value().shape_str());
  }
  return t.record("matmul", matmul(a.value(), b.value()), {a, b},
                  [a, b](const Tensor&, const Tensor& g, Tape& tp) {
                    if (tp.requires_grad(a)) tp.accumulate(a, matmul_nt(g, b.value()));
                    if (tp.requires_grad(b)) tp.accumulate(b, matmul_tn(a.value(), g));
                  });
}

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape("add", a, b);
  return t.record("add", add(a.value(), b.value()), {a, b},
                  [a, b](const Tensor&, const Tensor& g, Tape& tp) {
                    tp.accumulate(a, g);
                    tp.accumulate(b, g);
                  });
}

Var sub(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape("sub", a, b);
  return t.record("sub", sub(a.value(), b.value()), {a, b},
                  [a, b](const Tensor&, const Tensor& g, Tape& tp) {
                    tp.accumulate(a, g);
                    if (tp.requires_grad(b)) tp.accumulate(b, scaled(g, -1.0));
                  });
}

Var mul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape("mul", a, b);
  return t.record("mul", hadamard(a.value(), b.value()), {a, b},
                  [a, b](const Tensor&, const Tensor& g, Tape& tp) {
                    if (tp.requires_grad(a)) tp.accumulate(a, hadamard(g, b.value()));
                    if (tp.requires_grad(b)) tp.accumulate(b, hadamard(g, a.value()));
                  });
}

Var add_row(Var a, Var bias) {
  Tape& t = common_tape(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_row: bias " + bv.shape_str() + " does not broadcast over " +
                     av.shape_str());
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv(0, j);
  return t.record("add_row", std::move(out), {a, bias},
                  [a, bias](const Tensor&, const Tensor& g, Tape& tp) {
                    tp.accumulate(a, g);
                    if (tp.requires_grad(bias)) {
                      Tensor gb(1, g.cols());
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
                      tp.accumulate(bias, gb);
                    }
                  });
}

Var scale(Var a, double s) {
  return tape_of(a).record("scale", scaled(a.value(), s), {a},
                           [a, s](const Tensor&, const Tensor& g, Tape& tp) {
                             tp.accumulate(a, scaled(g, s));
                           });
}

Var one_minus(Var a) {
  return tape_of(a).record("one_minus", map_values(a.value(), [](double v) { return 1.0 - v; }),
                           {a}, [a](const Tensor&, const Tensor& g, Tape& tp) {
                             tp.accumulate(a, scaled(g, -1.0));
                           });
}

Var sigmoid(Var a) {
  Tensor y = map_values(a.value(), [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return tape_of(a).record("sigmoid", std::move(y), {a},
                           [a](const Tensor& y, const Tensor& g, Tape& tp) {
                             Tensor d = g;
                             auto dv = d.values();
                             auto yv = y.values();
                             for (std::size_t i = 0; i < dv.size(); ++i)
                               dv[i] *= yv[i] * (1.0 - yv[i]);
                             tp.accumulate(a, d);
                           });
}

Var tanh(Var a) {
  return tape_of(a).record("tanh", map_values(a.value(), [](double v) { return std::tanh(v); }),
                           {a}, [a](const Tensor& y, const Tensor& g, Tape& tp) {
                             Tensor d = g;
                             auto dv = d.values();
                             auto yv = y.values();
                             for (std::size_t i = 0; i < dv.size(); ++i)
                               dv[i] *= 1.0 - yv[i] * yv[i];
                             tp.accumulate(a, d);
                           });
}

Var relu(Var a) {
  return tape_of(a).record("relu",
                           map_values(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }),
                           {a}, [a](const Tensor& y, const Tensor& g, Tape& tp) {
                             Tensor d = g;
                             auto dv = d.values();
                             auto yv = y.values();
                             for (std::size_t i = 0; i < dv.size(); ++i)
                               if (!(yv[i] > 0.0)) dv[i] = 0.0;
                             tp.accumulate(a, d);
                           });
}

Var identity(Var a) {
  return tape_of(a).record("identity", a.value(), {a},
                           [a](const Tensor&, const Tensor& g, Tape& tp) { tp.accumulate(a, g); });
}

Var activate(Var a, Activation act) {
  switch (act) {
    case Activation::identity: return identity(a);
    case Activation::relu: return relu(a);
    case Activation::sigmoid: return sigmoid(a);
    case Activation::tanh: return tanh(a);
  }
  return identity(a);
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = tape_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    if (&tape_of(p) != &t) throw ContractError("concat_cols: operands on different tapes");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + parts.front().value().shape_str() +
                       " vs " + p.value().shape_str());
    }
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record("concat_cols", std::move(out), parts,
                  [inputs](const Tensor&, const Tensor& g, Tape& tp) {
                    std::size_t off = 0;
                    for (Var p : inputs) {
                      const std::size_t c = p.cols();
                      if (tp.requires_grad(p)) {
                        Tensor d(g.rows(), c);
                        for (std::size_t i = 0; i < g.rows(); ++i)
                          for (std::size_t j = 0; j < c; ++j) d(i, j) = g(i, off + j);
                        tp.accumulate(p, d);
                      }
                      off += c;
                    }
                  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin > end || end > av.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + av.shape_str());
  }
  Tensor out(av.rows(), end - begin);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = av(i, j);
  return tape_of(a).record("slice_cols", std::move(out), {a},
                           [a, begin](const Tensor&, const Tensor& g, Tape& tp) {
                             Tensor d(a.rows(), a.cols());
                             for (std::size_t i = 0; i < g.rows(); ++i)
                               for (std::size_t j = 0; j < g.cols(); ++j)
                                 d(i, begin + j) = g(i, j);
                             tp.accumulate(a, d);
                           });
}

Var repeat_cols(Var a, std::size_t times) {
  if (times == 0) throw ShapeError("repeat_cols: times must be positive");
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols() * times);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j)
      for (std::size_t k = 0; k < times; ++k) out(i, j * times + k) = av(i, j);
  return tape_of(a).record("repeat_cols", std::move(out), {a},
                           [a, times](const Tensor&, const Tensor& g, Tape& tp) {
                             Tensor d(a.rows(), a.cols());
                             for (std::size_t i = 0; i < d.rows(); ++i)
                               for (std::size_t j = 0; j < d.cols(); ++j)
                                 for (std::size_t k = 0; k < times; ++k)
                                   d(i, j) += g(i, j * times + k);
                             tp.accumulate(a, d);
                           });
}

Var block_left_mul(const Tensor& op, Var x) {
  return tape_of(x).record("block_left_mul", block_left_mul(op, x.value()), {x},
                           [op, x](const Tensor&, const Tensor& g, Tape& tp) {
                             tp.accumulate(x, block_left_mul_t(op, g));
                           });
}

Var block_left_mul_t(const Tensor& op, Var x) {
  return tape_of(x).record("block_left_mul_t", block_left_mul_t(op, x.value()), {x},
                           [op, x](const Tensor&, const Tensor& g, Tape& tp) {
                             tp.accumulate(x, block_left_mul(op, g));
                           });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return tape_of(a).record("sum", Tensor(1, 1, s), {a},
                           [a](const Tensor&, const Tensor& g, Tape& tp) {
                             tp.accumulate(a, Tensor(a.rows(), a.cols(), g(0, 0)));
                           });
}

Var sum_squares(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  return tape_of(a).record("sum_squares", Tensor(1, 1, s), {a},
                           [a](const Tensor&, const Tensor& g, Tape& tp) {
                             tp.accumulate(a, scaled(a.value(), 2.0 * g(0, 0)));
                           });
}

}  // namespace m2g2
