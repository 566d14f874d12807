#pragma once

#include <functional>
#include <vector>

#include "grapple/matrix.hpp"

namespace grapple {

// Handle into a Tape. Cheap to copy; only valid for the tape that made it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode autodiff over Matrix values.
//
// Every primitive evaluates eagerly (forward values are available as soon
// as the op is built — some callers read them mid-construction) and, when
// any input needs a gradient, records a pull-back closure. backward(loss)
// walks the records in reverse creation order; creation order is a valid
// topological order because inputs always exist before their consumers.
//
// Gradients accumulate additively: a node feeding k consumers receives the
// sum of k pull-back contributions. Single-threaded by design; run
// independent tapes on independent threads if parallelism is wanted.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // --- node creation -----------------------------------------------------
  Var leaf(Matrix value, bool requires_grad);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  // --- primitives ---------------------------------------------------------
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var relu(Var a);
  Var max_const(Var a, double c);
  Var exp_elem(Var a);
  Var log_elem(Var a);
  Var sqrt_elem(Var a);
  Var softmax_rows(Var a);
  Var sum_rows(Var a);
  Var mean_rows(Var a);
  Var sum_all(Var a);   // -> 1x1
  Var mean_all(Var a);  // -> 1x1
  Var l2norm_rows(Var a);
  Var concat_cols(Var a, Var b);
  Var gather_rows(Var a, std::vector<int> idx);
  Var scatter_add_rows(Var src, std::vector<int> dst, int out_rows);
  Var broadcast_row(Var row, int n);

  // --- access ---------------------------------------------------------
  const Matrix& val(Var v) const;
  // Gradient of the last backward() target w.r.t. v; zero grid if the node
  // was never reached (e.g. ReLU-clipped everywhere).
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  // Populates grads of every requires_grad ancestor of loss. loss must be
  // scalar (1x1). May be called once per tape.
  void backward(Var loss);

 private:
  struct Node {
    Matrix val;
    Matrix grad;                       // empty until backward touches it
    bool requires_grad = false;        // leaf flag or inherited from inputs
    std::function<void(Tape&)> pull;   // accumulates into parents' grads
  };

  Var push(Matrix value, bool requires_grad, std::function<void(Tape&)> pull);
  Node& node(Var v);
  const Node& node(Var v) const;
  Matrix& grad_slot(Var v);  // allocates a zero grid on first touch

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace grapple
