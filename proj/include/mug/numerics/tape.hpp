#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mug/error.hpp"
#include "mug/numerics/mat.hpp"

// Minimal reverse-mode differentiation over the fixed op set the MUG losses
// need. A Tape owns every node; nodes only reference earlier nodes, so the
// recorded graph is acyclic by construction.
namespace mug::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Mat& value() const;
  const Mat& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

class Tape {
 public:
  // Receives the gradient flowing into the node; accumulates into inputs.
  using Backward = std::function<void(Tape&, const Mat&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat m) { return push("constant", std::move(m), {}, nullptr, false); }
  Var parameter(Mat m) { return push("parameter", std::move(m), {}, nullptr, true); }

  // Registers an op node. Requires-grad propagates from the inputs.
  Var record(const char* op, Mat value, const std::vector<Var>& inputs, Backward back) {
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    bool needs = false;
    for (const Var& v : inputs) {
      if (v.tape != this) throw ContractError(std::string(op) + ": operand belongs to a different tape");
      ids.push_back(v.id);
      needs = needs || nodes_[v.id].requires_grad;
    }
    if (!value.all_finite()) throw NumericalError(std::string(op) + ": non-finite value produced");
    return push(op, std::move(value), std::move(ids), needs ? std::move(back) : Backward{}, needs);
  }

  // Computes d(root)/d(node) for every node. Grads are reset first, so
  // calling backward twice on the same graph yields identical results.
  void backward(Var root) {
    if (root.tape != this) throw ContractError("backward: root belongs to a different tape");
    const Mat& rv = nodes_[root.id].value;
    if (rv.rows != 1 || rv.cols != 1) throw ContractError("backward: root must be scalar (1x1), got " + shape_str(rv));
    for (Node& n : nodes_) n.grad = Mat(n.value.rows, n.value.cols, 0.0);
    nodes_[root.id].grad.data[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.back) n.back(*this, n.grad);
    }
  }

  const Mat& value(std::size_t id) const { return nodes_.at(id).value; }
  const Mat& grad(std::size_t id) const { return nodes_.at(id).grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const char* op(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient accumulator for an input; only called during backward.
  Mat& grad_acc(std::size_t id) { return nodes_[id].grad; }

 private:
  struct Node {
    const char* op;
    std::vector<std::size_t> inputs;
    Mat value;
    Mat grad;
    Backward back;
    bool requires_grad;
  };

  Var push(const char* op, Mat value, std::vector<std::size_t> inputs, Backward back, bool requires_grad) {
    nodes_.push_back(Node{op, std::move(inputs), std::move(value), Mat{}, std::move(back), requires_grad});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

inline const Mat& Var::value() const { return tape->value(id); }
inline const Mat& Var::grad() const { return tape->grad(id); }

namespace detail {

inline bool wants(Tape& t, const Var& v) { return t.requires_grad(v.id); }

// Shape of b relative to a for broadcasting binary ops.
enum class Bcast { Same, Row, Col, Scalar };

inline Bcast broadcast_kind(const Mat& a, const Mat& b, const char* op) {
  if (a.same_shape(b)) return Bcast::Same;
  if (b.rows == 1 && b.cols == 1) return Bcast::Scalar;
  if (b.rows == 1 && b.cols == a.cols) return Bcast::Row;
  if (b.cols == 1 && b.rows == a.rows) return Bcast::Col;
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

inline std::size_t bidx(Bcast k, const Mat& b, std::size_t i, std::size_t j) {
  switch (k) {
    case Bcast::Same: return i * b.cols + j;
    case Bcast::Row: return j;
    case Bcast::Col: return i;
    case Bcast::Scalar: return 0;
  }
  return 0;
}

template <class F>
Mat zip(const Mat& a, const Mat& b, Bcast k, F f) {
  Mat r(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) r(i, j) = f(a(i, j), b.data[bidx(k, b, i, j)]);
  return r;
}

template <class F>
Mat map(const Mat& a, F f) {
  Mat r(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) r.data[i] = f(a.data[i]);
  return r;
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); }

}  // namespace detail

// ---- binary ----

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  Mat v = kernels::matmul(a.value(), b.value());
  return t.record("matmul", std::move(v), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (detail::wants(t, a)) kernels::axpy(1.0, kernels::matmul_nt(g, b.value()), t.grad_acc(a.id));
    if (detail::wants(t, b)) kernels::axpy(1.0, kernels::matmul_tn(a.value(), g), t.grad_acc(b.id));
  });
}

// a + b with b broadcast over rows (1 x c), columns (r x 1), or as a scalar.
inline Var add(Var a, Var b) {
  Tape& t = *a.tape;
  const auto k = detail::broadcast_kind(a.value(), b.value(), "add");
  Mat v = detail::zip(a.value(), b.value(), k, [](double x, double y) { return x + y; });
  return t.record("add", std::move(v), {a, b}, [a, b, k](Tape& t, const Mat& g) {
    if (detail::wants(t, a)) kernels::axpy(1.0, g, t.grad_acc(a.id));
    if (detail::wants(t, b)) {
      Mat& gb = t.grad_acc(b.id);
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) gb.data[detail::bidx(k, gb, i, j)] += g(i, j);
    }
  });
}

inline Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  const auto k = detail::broadcast_kind(a.value(), b.value(), "sub");
  Mat v = detail::zip(a.value(), b.value(), k, [](double x, double y) { return x - y; });
  return t.record("sub", std::move(v), {a, b}, [a, b, k](Tape& t, const Mat& g) {
    if (detail::wants(t, a)) kernels::axpy(1.0, g, t.grad_acc(a.id));
    if (detail::wants(t, b)) {
      Mat& gb = t.grad_acc(b.id);
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) gb.data[detail::bidx(k, gb, i, j)] -= g(i, j);
    }
  });
}

// Elementwise product, same broadcasting rules as add.
inline Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  const auto k = detail::broadcast_kind(a.value(), b.value(), "mul");
  Mat v = detail::zip(a.value(), b.value(), k, [](double x, double y) { return x * y; });
  return t.record("mul", std::move(v), {a, b}, [a, b, k](Tape& t, const Mat& g) {
    const Mat& av = a.value();
    const Mat& bv = b.value();
    if (detail::wants(t, a)) {
      Mat& ga = t.grad_acc(a.id);
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) ga(i, j) += g(i, j) * bv.data[detail::bidx(k, bv, i, j)];
    }
    if (detail::wants(t, b)) {
      Mat& gb = t.grad_acc(b.id);
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) gb.data[detail::bidx(k, gb, i, j)] += g(i, j) * av(i, j);
    }
  });
}

// ---- unary ----

inline Var transpose(Var a) {
  return a.tape->record("transpose", kernels::transpose(a.value()), {a}, [a](Tape& t, const Mat& g) {
    if (detail::wants(t, a)) kernels::axpy(1.0, kernels::transpose(g), t.grad_acc(a.id));
  });
}

inline Var scale(Var a, double c) {
  return a.tape->record("scale", kernels::scaled(a.value(), c), {a}, [a, c](Tape& t, const Mat& g) {
    if (detail::wants(t, a)) kernels::axpy(c, g, t.grad_acc(a.id));
  });
}

inline Var neg(Var a) {
  return a.tape->record("neg", kernels::scaled(a.value(), -1.0), {a}, [a](Tape& t, const Mat& g) {
    if (detail::wants(t, a)) kernels::axpy(-1.0, g, t.grad_acc(a.id));
  });
}

inline Var sigmoid(Var a) {
  Mat v = detail::map(a.value(), detail::stable_sigmoid);
  Mat cache = v;
  return a.tape->record("sigmoid", std::move(v), {a}, [a, cache = std::move(cache)](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * cache.data[i] * (1.0 - cache.data[i]);
  });
}

inline Var tanh(Var a) {
  Mat v = detail::map(a.value(), [](double x) { return std::tanh(x); });
  Mat cache = v;
  return a.tape->record("tanh", std::move(v), {a}, [a, cache = std::move(cache)](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * (1.0 - cache.data[i] * cache.data[i]);
  });
}

// Fixed positive exponent. Negative base with a non-integer exponent is a domain error.
inline Var pow(Var a, double p) {
  if (!(p > 0.0)) throw DomainError("pow: exponent must be positive, got " + std::to_string(p));
  const bool integral = std::floor(p) == p;
  for (double x : a.value().data)
    if (x < 0.0 && !integral) throw DomainError("pow: negative base " + std::to_string(x) + " with non-integer exponent " + std::to_string(p));
  Mat v = detail::map(a.value(), [p](double x) { return std::pow(x, p); });
  return a.tape->record("pow", std::move(v), {a}, [a, p](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    const Mat& av = a.value();
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = av.data[i];
      if (x == 0.0 && p < 1.0) continue;
      ga.data[i] += g.data[i] * p * std::pow(x, p - 1.0);
    }
  });
}

inline Var log(Var a) {
  for (double x : a.value().data)
    if (!(x > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(x));
  Mat v = detail::map(a.value(), [](double x) { return std::log(x); });
  return a.tape->record("log", std::move(v), {a}, [a](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    const Mat& av = a.value();
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / av.data[i];
  });
}

// log(sigmoid(x)), evaluated without overflow for large |x|.
inline Var log_sigmoid(Var a) {
  Mat v = detail::map(a.value(), detail::stable_log_sigmoid);
  return a.tape->record("log_sigmoid", std::move(v), {a}, [a](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    const Mat& av = a.value();
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * detail::stable_sigmoid(-av.data[i]);
  });
}

// max(x, 0) + slope * min(x, 0)
inline Var prelu(Var a, double slope) {
  Mat v = detail::map(a.value(), [slope](double x) { return x >= 0.0 ? x : slope * x; });
  return a.tape->record("prelu", std::move(v), {a}, [a, slope](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    const Mat& av = a.value();
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * (av.data[i] >= 0.0 ? 1.0 : slope);
  });
}

// ---- reductions ----

inline Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return a.tape->record("sum", Mat::scalar(s), {a}, [a](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    for (double& x : t.grad_acc(a.id).data) x += g.data[0];
  });
}

inline Var mean(Var a) {
  if (a.value().empty()) throw DimensionError("mean: empty operand");
  return scale(sum(a), 1.0 / double(a.value().size()));
}

// r x c -> r x 1
inline Var row_mean(Var a) {
  const Mat& av = a.value();
  if (av.cols == 0) throw DimensionError("row_mean: zero columns");
  Mat v(av.rows, 1);
  for (std::size_t i = 0; i < av.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < av.cols; ++j) s += av(i, j);
    v(i, 0) = s / double(av.cols);
  }
  return a.tape->record("row_mean", std::move(v), {a}, [a](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    Mat& ga = t.grad_acc(a.id);
    const double inv = 1.0 / double(ga.cols);
    for (std::size_t i = 0; i < ga.rows; ++i)
      for (std::size_t j = 0; j < ga.cols; ++j) ga(i, j) += g(i, 0) * inv;
  });
}

// r x c -> 1 x c
inline Var col_mean(Var a) {
  const Mat& av = a.value();
  if (av.rows == 0) throw DimensionError("col_mean: zero rows");
  Mat v(1, av.cols);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j) v(0, j) += av(i, j);
  for (double& x : v.data) x /= double(av.rows);
  return a.tape->record("col_mean", std::move(v), {a}, [a](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    Mat& ga = t.grad_acc(a.id);
    const double inv = 1.0 / double(ga.rows);
    for (std::size_t i = 0; i < ga.rows; ++i)
      for (std::size_t j = 0; j < ga.cols; ++j) ga(i, j) += g(0, j) * inv;
  });
}

// r x c -> r x 1 of row L2 norms. Zero rows have zero gradient.
inline Var row_norm(Var a) {
  const Mat& av = a.value();
  Mat v(av.rows, 1);
  for (std::size_t i = 0; i < av.rows; ++i) v(i, 0) = std::sqrt(kernels::dot(av.row_ptr(i), av.row_ptr(i), av.cols));
  Mat cache = v;
  return a.tape->record("row_norm", std::move(v), {a}, [a, cache = std::move(cache)](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    const Mat& av = a.value();
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < av.rows; ++i) {
      const double n = cache(i, 0);
      if (n == 0.0) continue;
      for (std::size_t j = 0; j < av.cols; ++j) ga(i, j) += g(i, 0) * av(i, j) / n;
    }
  });
}

// Row-wise cosine similarity, r x 1, clamped to [-1, 1]. A row pair with a
// zero-norm side yields 0 with zero gradient.
inline Var row_cos(Var a, Var b) {
  const Mat& av = a.value();
  const Mat& bv = b.value();
  require_same_shape(av, bv, "row_cos");
  Mat v(av.rows, 1);
  std::vector<double> na(av.rows), nb(av.rows);
  for (std::size_t i = 0; i < av.rows; ++i) {
    na[i] = std::sqrt(kernels::dot(av.row_ptr(i), av.row_ptr(i), av.cols));
    nb[i] = std::sqrt(kernels::dot(bv.row_ptr(i), bv.row_ptr(i), bv.cols));
    if (na[i] > 0.0 && nb[i] > 0.0) v(i, 0) = std::clamp(kernels::dot(av.row_ptr(i), bv.row_ptr(i), av.cols) / (na[i] * nb[i]), -1.0, 1.0);
  }
  Mat cache = v;
  return a.tape->record("row_cos", std::move(v), {a, b},
                        [a, b, na = std::move(na), nb = std::move(nb), cache = std::move(cache)](Tape& t, const Mat& g) {
                          const Mat& av = a.value();
                          const Mat& bv = b.value();
                          const bool ga_on = detail::wants(t, a), gb_on = detail::wants(t, b);
                          for (std::size_t i = 0; i < av.rows; ++i) {
                            if (na[i] == 0.0 || nb[i] == 0.0) continue;
                            const double c = cache(i, 0), gi = g(i, 0);
                            const double inv = 1.0 / (na[i] * nb[i]);
                            if (ga_on) {
                              Mat& ga = t.grad_acc(a.id);
                              for (std::size_t j = 0; j < av.cols; ++j) ga(i, j) += gi * (bv(i, j) * inv - c * av(i, j) / (na[i] * na[i]));
                            }
                            if (gb_on) {
                              Mat& gb = t.grad_acc(b.id);
                              for (std::size_t j = 0; j < av.cols; ++j) gb(i, j) += gi * (av(i, j) * inv - c * bv(i, j) / (nb[i] * nb[i]));
                            }
                          }
                        });
}

// Softmax over a row or column vector (max-subtracted).
inline Var softmax(Var a) {
  const Mat& av = a.value();
  if (av.rows != 1 && av.cols != 1) throw DimensionError("softmax: expected a vector, got " + shape_str(av));
  if (av.empty()) throw DimensionError("softmax: empty vector");
  const double m = *std::max_element(av.data.begin(), av.data.end());
  Mat v(av.rows, av.cols);
  double z = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) z += (v.data[i] = std::exp(av.data[i] - m));
  for (double& x : v.data) x /= z;
  Mat cache = v;
  return a.tape->record("softmax", std::move(v), {a}, [a, cache = std::move(cache)](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    const double gs = kernels::dot(g.data.data(), cache.data.data(), g.size());
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += cache.data[i] * (g.data[i] - gs);
  });
}

// ---- structural ----

// 1 x 1 view of a single entry.
inline Var element(Var a, std::size_t i, std::size_t j) {
  const Mat& av = a.value();
  if (i >= av.rows || j >= av.cols) throw DimensionError("element: index (" + std::to_string(i) + "," + std::to_string(j) + ") outside " + shape_str(av));
  return a.tape->record("element", Mat::scalar(av(i, j)), {a}, [a, i, j](Tape& t, const Mat& g) {
    if (detail::wants(t, a)) t.grad_acc(a.id)(i, j) += g.data[0];
  });
}

// Horizontal concatenation of operands with equal row counts.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  Mat v = parts.front().value();
  for (std::size_t p = 1; p < parts.size(); ++p) v = kernels::hconcat(v, parts[p].value());
  return parts.front().tape->record("concat_cols", std::move(v), parts, [parts](Tape& t, const Mat& g) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t c = p.cols();
      if (detail::wants(t, p)) {
        Mat& gp = t.grad_acc(p.id);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < c; ++j) gp(i, j) += g(i, off + j);
      }
      off += c;
    }
  });
}

inline Var select_rows(Var a, std::vector<std::size_t> idx) {
  for (std::size_t r : idx)
    if (r >= a.rows()) throw DimensionError("select_rows: row " + std::to_string(r) + " outside " + shape_str(a.value()));
  Mat v = kernels::select_rows(a.value(), idx);
  return a.tape->record("select_rows", std::move(v), {a}, [a, idx = std::move(idx)](Tape& t, const Mat& g) {
    if (!detail::wants(t, a)) return;
    Mat& ga = t.grad_acc(a.id);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < g.cols; ++j) ga(idx[i], j) += g(i, j);
  });
}

// Squared L2 norm of all entries.
inline Var sq_norm(Var a) { return sum(mul(a, a)); }

}  // namespace mug::ad
