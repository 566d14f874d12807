#include "grapple/tape.hpp"

#include <cmath>
#include <utility>

#include "grapple/error.hpp"

namespace grapple {

namespace {

void accumulate(Matrix& dst, const Matrix& inc) {
  check(dst.same_shape(inc), "grad accumulate: shape mismatch " + shape_str(dst) +
                                 " vs " + shape_str(inc));
  for (int i = 0; i < dst.size(); ++i) dst.a[i] += inc.a[i];
}

}  // namespace

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&)> pull) {
  Node n;
  n.val = std::move(value);
  n.requires_grad = requires_grad;
  n.pull = std::move(pull);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) {
  check(v.id >= 0 && v.id < size(), "Tape: invalid Var id " + std::to_string(v.id));
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  check(v.id >= 0 && v.id < size(), "Tape: invalid Var id " + std::to_string(v.id));
  return nodes_[v.id];
}

Matrix& Tape::grad_slot(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = Matrix::zeros(n.val.rows, n.val.cols);
  return n.grad;
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

const Matrix& Tape::val(Var v) const { return node(v).val; }

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  check(backward_done_, "Tape::grad: backward() has not run");
  check(!n.grad.empty(), "Tape::grad: node does not carry a gradient");
  return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::backward(Var loss) {
  check(!backward_done_, "Tape::backward: called twice on one tape");
  const Node& ln = node(loss);
  check(ln.val.is_scalar(),
        "Tape::backward: loss must be 1x1, got " + shape_str(ln.val));
  check(ln.requires_grad, "Tape::backward: loss does not depend on any parameter");
  grad_slot(loss).a[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.pull) continue;
    n.pull(*this);
  }
  // Nodes the sweep never reached (e.g. everything clipped by a ReLU)
  // report an explicit zero gradient rather than an error.
  for (Node& n : nodes_)
    if (n.requires_grad && n.grad.empty())
      n.grad = Matrix::zeros(n.val.rows, n.val.cols);
  backward_done_ = true;
}

// --- primitives ------------------------------------------------------------

Var Tape::matmul(Var a, Var b) {
  Matrix out = grapple::matmul(val(a), val(b));
  if (!requires_grad(a) && !requires_grad(b)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, b, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    if (t.requires_grad(a)) accumulate(t.grad_slot(a), matmul_nt(g, t.val(b)));
    if (t.requires_grad(b)) accumulate(t.grad_slot(b), matmul_tn(t.val(a), g));
  };
  return o;
}

Var Tape::transpose(Var a) {
  Matrix out = grapple::transpose(val(a));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    accumulate(t.grad_slot(a), grapple::transpose(t.node(o).grad));
  };
  return o;
}

Var Tape::add(Var a, Var b) {
  Matrix out = grapple::add(val(a), val(b));
  if (!requires_grad(a) && !requires_grad(b)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, b, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    if (t.requires_grad(a)) accumulate(t.grad_slot(a), g);
    if (t.requires_grad(b)) accumulate(t.grad_slot(b), g);
  };
  return o;
}

Var Tape::sub(Var a, Var b) {
  Matrix out = grapple::sub(val(a), val(b));
  if (!requires_grad(a) && !requires_grad(b)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, b, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    if (t.requires_grad(a)) accumulate(t.grad_slot(a), g);
    if (t.requires_grad(b)) accumulate(t.grad_slot(b), grapple::scale(g, -1.0));
  };
  return o;
}

Var Tape::mul(Var a, Var b) {
  Matrix out = grapple::mul(val(a), val(b));
  if (!requires_grad(a) && !requires_grad(b)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, b, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    if (t.requires_grad(a)) accumulate(t.grad_slot(a), grapple::mul(g, t.val(b)));
    if (t.requires_grad(b)) accumulate(t.grad_slot(b), grapple::mul(g, t.val(a)));
  };
  return o;
}

Var Tape::div(Var a, Var b) {
  Matrix out = grapple::div(val(a), val(b));
  if (!requires_grad(a) && !requires_grad(b)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, b, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    if (t.requires_grad(a)) accumulate(t.grad_slot(a), grapple::div(g, t.val(b)));
    if (t.requires_grad(b)) {
      // d/dB (A/B) = -A/B^2 = -(A/B)/B; reuse the forward value.
      Matrix d = grapple::div(grapple::mul(g, t.val(o)), t.val(b));
      accumulate(t.grad_slot(b), grapple::scale(d, -1.0));
    }
  };
  return o;
}

Var Tape::scale(Var a, double s) {
  Matrix out = grapple::scale(val(a), s);
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o, s](Tape& t) {
    accumulate(t.grad_slot(a), grapple::scale(t.node(o).grad, s));
  };
  return o;
}

Var Tape::add_scalar(Var a, double s) {
  Matrix out = grapple::add_scalar(val(a), s);
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) { accumulate(t.grad_slot(a), t.node(o).grad); };
  return o;
}

Var Tape::relu(Var a) {
  Matrix out = grapple::relu(val(a));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    const Matrix& x = t.val(a);
    Matrix d(x.rows, x.cols);
    // Subgradient at 0 is fixed to 0 (strict >) for determinism.
    for (int i = 0; i < x.size(); ++i) d.a[i] = x.a[i] > 0.0 ? g.a[i] : 0.0;
    accumulate(t.grad_slot(a), d);
  };
  return o;
}

Var Tape::max_const(Var a, double c) {
  Matrix out = grapple::max_const(val(a), c);
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o, c](Tape& t) {
    const Matrix& g = t.node(o).grad;
    const Matrix& x = t.val(a);
    Matrix d(x.rows, x.cols);
    for (int i = 0; i < x.size(); ++i) d.a[i] = x.a[i] > c ? g.a[i] : 0.0;
    accumulate(t.grad_slot(a), d);
  };
  return o;
}

Var Tape::exp_elem(Var a) {
  Matrix out = grapple::exp_elem(val(a));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    accumulate(t.grad_slot(a), grapple::mul(t.node(o).grad, t.val(o)));
  };
  return o;
}

Var Tape::log_elem(Var a) {
  Matrix out = grapple::log_elem(val(a));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    accumulate(t.grad_slot(a), grapple::div(t.node(o).grad, t.val(a)));
  };
  return o;
}

Var Tape::sqrt_elem(Var a) {
  Matrix out = grapple::sqrt_elem(val(a));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    const Matrix& y = t.val(o);
    Matrix d(y.rows, y.cols);
    for (int i = 0; i < y.size(); ++i) {
      if (g.a[i] == 0.0) {
        d.a[i] = 0.0;
        continue;
      }
      check(y.a[i] > 0.0, "sqrt backward: derivative at zero input is unbounded");
      d.a[i] = 0.5 * g.a[i] / y.a[i];
    }
    accumulate(t.grad_slot(a), d);
  };
  return o;
}

Var Tape::softmax_rows(Var a) {
  Matrix out = grapple::softmax_rows(val(a));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    const Matrix& p = t.val(o);
    Matrix d(p.rows, p.cols);
    for (int i = 0; i < p.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < p.cols; ++j) dot += g.at(i, j) * p.at(i, j);
      for (int j = 0; j < p.cols; ++j) d.at(i, j) = p.at(i, j) * (g.at(i, j) - dot);
    }
    accumulate(t.grad_slot(a), d);
  };
  return o;
}

Var Tape::sum_rows(Var a) {
  Matrix out = grapple::sum_rows(val(a));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    const Matrix& x = t.val(a);
    Matrix d(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
      for (int j = 0; j < x.cols; ++j) d.at(i, j) = g.at(i, 0);
    accumulate(t.grad_slot(a), d);
  };
  return o;
}

Var Tape::mean_rows(Var a) {
  Matrix out = grapple::mean_rows(val(a));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    const Matrix& x = t.val(a);
    Matrix d(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
      for (int j = 0; j < x.cols; ++j) d.at(i, j) = g.at(i, 0) / x.cols;
    accumulate(t.grad_slot(a), d);
  };
  return o;
}

Var Tape::sum_all(Var a) {
  Matrix out(1, 1, grapple::sum_all(val(a)));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    const Matrix& x = t.val(a);
    accumulate(t.grad_slot(a), Matrix(x.rows, x.cols, t.node(o).grad.a[0]));
  };
  return o;
}

Var Tape::mean_all(Var a) {
  Matrix out(1, 1, grapple::mean_all(val(a)));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    const Matrix& x = t.val(a);
    accumulate(t.grad_slot(a), Matrix(x.rows, x.cols, t.node(o).grad.a[0] / x.size()));
  };
  return o;
}

Var Tape::l2norm_rows(Var a) {
  Matrix out = grapple::l2norm_rows(val(a));
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    const Matrix& x = t.val(a);
    const Matrix& r = t.val(o);
    Matrix d(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
      // Zero row: norm is not differentiable there; fixed subgradient 0,
      // same convention as ReLU at its kink.
      if (r.at(i, 0) == 0.0) continue;
      double s = g.at(i, 0) / r.at(i, 0);
      for (int j = 0; j < x.cols; ++j) d.at(i, j) = s * x.at(i, j);
    }
    accumulate(t.grad_slot(a), d);
  };
  return o;
}

Var Tape::concat_cols(Var a, Var b) {
  Matrix out = grapple::concat_cols(val(a), val(b));
  if (!requires_grad(a) && !requires_grad(b)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, b, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    const Matrix& A = t.val(a);
    const Matrix& B = t.val(b);
    if (t.requires_grad(a)) {
      Matrix da(A.rows, A.cols);
      for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) da.at(i, j) = g.at(i, j);
      accumulate(t.grad_slot(a), da);
    }
    if (t.requires_grad(b)) {
      Matrix db(B.rows, B.cols);
      for (int i = 0; i < B.rows; ++i)
        for (int j = 0; j < B.cols; ++j) db.at(i, j) = g.at(i, A.cols + j);
      accumulate(t.grad_slot(b), db);
    }
  };
  return o;
}

Var Tape::gather_rows(Var a, std::vector<int> idx) {
  Matrix out = grapple::gather_rows(val(a), idx);
  if (!requires_grad(a)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [a, o, idx = std::move(idx)](Tape& t) {
    // Rows gathered k times accumulate k contributions.
    accumulate(t.grad_slot(a),
               grapple::scatter_add_rows(t.node(o).grad, idx, t.val(a).rows));
  };
  return o;
}

Var Tape::scatter_add_rows(Var src, std::vector<int> dst, int out_rows) {
  Matrix out = grapple::scatter_add_rows(val(src), dst, out_rows);
  if (!requires_grad(src)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [src, o, dst = std::move(dst)](Tape& t) {
    accumulate(t.grad_slot(src), grapple::gather_rows(t.node(o).grad, dst));
  };
  return o;
}

Var Tape::broadcast_row(Var row, int n) {
  Matrix out = grapple::broadcast_row(val(row), n);
  if (!requires_grad(row)) return push(std::move(out), false, nullptr);
  Var o = push(std::move(out), true, nullptr);
  node(o).pull = [row, o](Tape& t) {
    const Matrix& g = t.node(o).grad;
    Matrix d(1, g.cols);
    for (int i = 0; i < g.rows; ++i)
      for (int j = 0; j < g.cols; ++j) d.at(0, j) += g.at(i, j);
    accumulate(t.grad_slot(row), d);
  };
  return o;
}

}  // namespace grapple
