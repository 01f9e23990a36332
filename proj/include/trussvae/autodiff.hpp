#pragma once

/**
 * @file autodiff.hpp
 * @brief Reverse-mode automatic differentiation over dense matrices.
 *
 * A Tape records every operation in evaluation order. Values are Eigen
 * matrices with one row per sample. backward() walks the tape in reverse and
 * accumulates adjoints into every node that depends on a variable.
 *
 *   Tape t;
 *   Var w = t.variable(W);
 *   Var y = sum(square(matmul(t.constant(X), w)));
 *   t.backward(y);
 *   t.grad(w);
 */

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trussvae/errors.hpp"

namespace trussvae::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Var constant(Matrix value, const char* op = "constant") { return push(std::move(value), false, {}, op); }
  Var variable(Matrix value) { return push(std::move(value), true, {}, "variable"); }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  /// Adjoint of v after backward(); zero when v does not influence the output.
  Matrix grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  double scalar(Var v) const {
    if (value(v).size() != 1) throw ShapeError("expected a scalar node");
    return value(v)(0, 0);
  }

  /// Records a node computed from parents; `fn` receives the output adjoint.
  Var record(Matrix value, bool needs_grad, Backward fn, const char* op) {
    if (!value.allFinite()) throw NumericError(std::string("non-finite value produced by op '") + op + "'");
    return push(std::move(value), needs_grad, needs_grad ? std::move(fn) : Backward{}, op);
  }

  void accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  void backward(Var out, const Matrix& seed) {
    if (seed.rows() != value(out).rows() || seed.cols() != value(out).cols())
      throw ShapeError("backward seed shape mismatch");
    for (Node& n : nodes_) n.grad.resize(0, 0);
    accumulate(out, seed);
    for (int i = out.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      if (!n.grad.allFinite()) throw NumericError(std::string("non-finite gradient at op '") + n.op + "'");
      const Matrix g = n.grad;
      n.backward(*this, g);
    }
  }

  void backward(Var scalar_out) { backward(scalar_out, Matrix::Ones(1, 1)); }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
    const char* op = "";
  };

  Var push(Matrix value, bool needs_grad, Backward fn, const char* op) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(fn), needs_grad, op});
    return Var{this, int(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

namespace detail {

inline void same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(std::string("shape mismatch in ") + op);
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.cols() != B.rows()) throw ShapeError("shape mismatch in matmul");
  return t.record(A * B, t.needs_grad(a) || t.needs_grad(b),
                  [a, b](Tape& tp, const Matrix& g) {
                    if (tp.needs_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
                    if (tp.needs_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
                  },
                  "matmul");
}

/// a (n x m) plus a bias row (1 x m) broadcast over rows.
inline Var add_row(Var a, Var bias) {
  Tape& t = *a.tape;
  const Matrix& A = t.value(a);
  const Matrix& b = t.value(bias);
  if (b.rows() != 1 || b.cols() != A.cols()) throw ShapeError("shape mismatch in add_row");
  Matrix out = A;
  out.rowwise() += b.row(0);
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(bias),
                  [a, bias](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g);
                    tp.accumulate(bias, g.colwise().sum());
                  },
                  "add_row");
}

inline Var add(Var a, Var b) {
  Tape& t = *a.tape;
  detail::same_shape(t.value(a), t.value(b), "add");
  return t.record(t.value(a) + t.value(b), t.needs_grad(a) || t.needs_grad(b),
                  [a, b](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g);
                    tp.accumulate(b, g);
                  },
                  "add");
}

inline Var sub(Var a, Var b) {
  Tape& t = *a.tape;
  detail::same_shape(t.value(a), t.value(b), "sub");
  return t.record(t.value(a) - t.value(b), t.needs_grad(a) || t.needs_grad(b),
                  [a, b](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g);
                    tp.accumulate(b, -g);
                  },
                  "sub");
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  detail::same_shape(t.value(a), t.value(b), "mul");
  return t.record(t.value(a).cwiseProduct(t.value(b)), t.needs_grad(a) || t.needs_grad(b),
                  [a, b](Tape& tp, const Matrix& g) {
                    if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
                    if (tp.needs_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
                  },
                  "mul");
}

inline Var scale(Var a, double c) {
  Tape& t = *a.tape;
  return t.record(c * t.value(a), t.needs_grad(a), [a, c](Tape& tp, const Matrix& g) { tp.accumulate(a, c * g); },
                  "scale");
}

inline Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  return t.record((t.value(a).array() + c).matrix(), t.needs_grad(a),
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g); }, "add_scalar");
}

inline Var square(Var a) {
  Tape& t = *a.tape;
  return t.record(t.value(a).cwiseAbs2(), t.needs_grad(a),
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, 2.0 * g.cwiseProduct(tp.value(a))); }, "square");
}

inline Var exp(Var a) {
  Tape& t = *a.tape;
  Matrix out = t.value(a).array().exp().matrix();
  Matrix saved = out;
  return t.record(std::move(out), t.needs_grad(a),
                  [a, saved = std::move(saved)](Tape& tp, const Matrix& g) { tp.accumulate(a, g.cwiseProduct(saved)); },
                  "exp");
}

inline Var tanh(Var a) {
  Tape& t = *a.tape;
  Matrix out = t.value(a).array().tanh().matrix();
  Matrix saved = out;
  return t.record(std::move(out), t.needs_grad(a),
                  [a, saved = std::move(saved)](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, (g.array() * (1.0 - saved.array().square())).matrix());
                  },
                  "tanh");
}

inline Var relu(Var a) {
  Tape& t = *a.tape;
  return t.record(t.value(a).cwiseMax(0.0), t.needs_grad(a),
                  [a](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, (tp.value(a).array() > 0.0).select(g, 0.0).matrix());
                  },
                  "relu");
}

inline Matrix sigmoid_values(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

inline Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Matrix out = sigmoid_values(t.value(a));
  Matrix saved = out;
  return t.record(std::move(out), t.needs_grad(a),
                  [a, saved = std::move(saved)](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, (g.array() * saved.array() * (1.0 - saved.array())).matrix());
                  },
                  "sigmoid");
}

/// Numerically stable log(1 + exp(x)).
inline Var softplus(Var a) {
  Tape& t = *a.tape;
  const Matrix& x = t.value(a);
  Matrix out = (x.array().max(0.0) + (-x.array().abs()).exp().log1p()).matrix();
  return t.record(std::move(out), t.needs_grad(a),
                  [a](Tape& tp, const Matrix& g) {
                    tp.accumulate(a, g.cwiseProduct(sigmoid_values(tp.value(a))));
                  },
                  "softplus");
}

/// Clamp to [lo, hi]; the gradient passes only where the input is inside.
inline Var clamp(Var a, double lo, double hi) {
  Tape& t = *a.tape;
  return t.record(t.value(a).cwiseMax(lo).cwiseMin(hi), t.needs_grad(a),
                  [a, lo, hi](Tape& tp, const Matrix& g) {
                    const auto& x = tp.value(a).array();
                    tp.accumulate(a, ((x > lo) && (x < hi)).select(g, 0.0).matrix());
                  },
                  "clamp");
}

/// Forward value `forward`, identity gradient into a (straight-through estimator).
inline Var straight_through(Var a, Matrix forward) {
  Tape& t = *a.tape;
  detail::same_shape(t.value(a), forward, "straight_through");
  return t.record(std::move(forward), t.needs_grad(a), [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g); },
                  "straight_through");
}

/// Value of a, no gradient.
inline Var detach(Var a) { return a.tape->constant(a.tape->value(a), "detach"); }

inline Var sum(Var a) {
  Tape& t = *a.tape;
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  const Eigen::Index r = t.value(a).rows(), c = t.value(a).cols();
  return t.record(std::move(out), t.needs_grad(a),
                  [a, r, c](Tape& tp, const Matrix& g) { tp.accumulate(a, Matrix::Constant(r, c, g(0, 0))); }, "sum");
}

inline Var mean(Var a) {
  const double n = double(a.tape->value(a).size());
  return scale(sum(a), 1.0 / n);
}

inline Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  Tape& t = *a.tape;
  const Matrix& A = t.value(a);
  if (begin < 0 || count < 0 || begin + count > A.cols()) throw ShapeError("slice_cols out of range");
  const Eigen::Index r = A.rows(), c = A.cols();
  return t.record(A.middleCols(begin, count), t.needs_grad(a),
                  [a, begin, count, r, c](Tape& tp, const Matrix& g) {
                    Matrix full = Matrix::Zero(r, c);
                    full.middleCols(begin, count) = g;
                    tp.accumulate(a, full);
                  },
                  "slice_cols");
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  Tape& t = *parts.front().tape;
  Eigen::Index rows = t.value(parts.front()).rows(), cols = 0;
  bool ng = false;
  for (Var p : parts) {
    if (t.value(p).rows() != rows) throw ShapeError("row mismatch in concat_cols");
    cols += t.value(p).cols();
    ng = ng || t.needs_grad(p);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, t.value(p).cols()) = t.value(p);
    at += t.value(p).cols();
  }
  return t.record(std::move(out), ng,
                  [parts](Tape& tp, const Matrix& g) {
                    Eigen::Index at2 = 0;
                    for (Var p : parts) {
                      const Eigen::Index w = tp.value(p).cols();
                      tp.accumulate(p, g.middleCols(at2, w));
                      at2 += w;
                    }
                  },
                  "concat_cols");
}

/**
 * Reinterprets entries [offset, offset + rows*cols) of a flat column vector
 * as a column-major rows x cols matrix.
 */
inline Var view(Var flat, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = *flat.tape;
  const Matrix& F = t.value(flat);
  if (F.cols() != 1 || offset + rows * cols > F.rows()) throw ShapeError("view out of range");
  Matrix out = Eigen::Map<const Matrix>(F.data() + offset, rows, cols);
  const Eigen::Index n = F.rows();
  return t.record(std::move(out), t.needs_grad(flat),
                  [flat, offset, rows, cols, n](Tape& tp, const Matrix& g) {
                    Matrix full = Matrix::Zero(n, 1);
                    Eigen::Map<Matrix>(full.data() + offset, rows, cols) = g;
                    tp.accumulate(flat, full);
                  },
                  "view");
}

/**
 * Value and gradient of a scalar function of a flat parameter vector.
 * `loss_fn(tape, params)` must return a 1x1 node built from `params`.
 */
template <typename LossFn>
std::pair<double, Eigen::VectorXd> value_and_gradient(LossFn&& loss_fn, const Eigen::VectorXd& params) {
  Tape tape;
  const Var p = tape.variable(Matrix(params));
  const Var loss = loss_fn(tape, p);
  tape.backward(loss);
  return {tape.scalar(loss), tape.grad(p).col(0)};
}

}  // namespace trussvae::ad
